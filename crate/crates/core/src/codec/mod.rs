//! The learned codec: transforms, quantization, entropy coding and the
//! container format.

pub mod bitstream;
pub mod checkpoint;
pub mod config;
pub mod entropy;
pub mod quantize;
pub mod range_coder;
pub mod transforms;

pub use bitstream::{bpp, Bitstream, Provenance};
pub use checkpoint::Checkpoint;
pub use config::{CodecConfig, ConfigId, LAMBDA_TABLE};
pub use entropy::{estimate_rate, range_decode, range_encode, EntropyModel, FactorizedPrior};
pub use quantize::{quantize, round_half_away, QuantizedLatent};
pub use transforms::HyperpriorCodec;
