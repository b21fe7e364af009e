pub mod cli;
pub mod codec;
pub mod data;
pub mod error;
pub mod eval;
pub mod image;
pub mod lma;
pub mod model;
pub mod nn;
pub mod registry;
pub mod service;
pub mod tma;
pub mod train;

pub use error::{Error, Result};
