//! From-scratch convolutional network: tensors, layer ops, the two-stage
//! architecture, optimizers, checkpoints and gradient checking.

pub mod checkpoint;
mod gemm;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod optim;
pub mod tensor;

pub use gradcheck::{gradient_check, GradCheckReport};
pub use layers::{ConvLayer, DenseLayer, Mode};
pub use network::{ArchSpec, Gradients, Layer, Network, SUPPORTED_INPUT_SIZES};
pub use optim::{OptimizerKind, OptimizerState};
pub use tensor::Tensor4;
