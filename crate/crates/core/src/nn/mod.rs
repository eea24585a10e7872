//! Layer vocabulary: (dilated) convolution, transposed convolution, ReLU,
//! max pooling, nearest upsampling, channel concatenation, softmax
//! cross-entropy and SGD.

pub mod conv;
pub mod init;
pub mod loss;
pub mod optim;
pub mod pool;
pub mod shape_ops;

pub use conv::ConvSpec;
pub use optim::{sgd_step, OptimizerState};
