//! Epidemic state forecasting from fused temporal and spatial CNNs, stabilized
//! by a stochastic ensemble Kalman filter, with SEIR-family baselines and an
//! experiment harness.

pub mod assim;
pub mod baselines;
pub mod container;
pub mod data;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Parameter, Tensor};
