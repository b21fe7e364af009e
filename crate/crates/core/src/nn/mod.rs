//! A small CPU neural-network engine: CHW tensors, im2col convolutions,
//! reverse-mode differentiation, and Adam.

pub mod conv;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod tensor;

pub use conv::ConvGeometry;
pub use graph::{Gradients, Graph, ParamId, ParamStore, Var};
pub use layers::{Conv2d, ConvTranspose2d, Gdn, ResidualBlock};
pub use optim::{Adam, AdamConfig};
pub use tensor::{float::Float, Scalar, Tensor};
