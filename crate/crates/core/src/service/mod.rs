//! Shared pipeline, configuration and the HTTP API.

pub mod config;
pub mod http;
pub mod pipeline;

pub use config::{FileConfig, ServiceConfig, MODEL_DIR_ENV};
pub use http::{router, serve, Session};
pub use pipeline::{Backends, CompressResult, CompressionMetrics, MaskRequest, MaskResult};
