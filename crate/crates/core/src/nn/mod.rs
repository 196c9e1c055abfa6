//! Minimal tensor engine: convolution, pooling, dense layers, ReLU, losses and SGD.

pub mod gradcheck;
pub mod loss;
pub mod network;
pub mod ops;
pub mod optim;

pub use gradcheck::{gradient_check, GradientCheck};
pub use loss::{loss, LossKind};
pub use network::{Gradients, LayerSpec, Network, Trace};
pub use ops::{conv2d, dense, pool2d, relu, Padding, PoolMode};
pub use optim::{fit, sgd_step, Learner, TrainOptions};
