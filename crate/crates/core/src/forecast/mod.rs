//! CNN-T, CNN-S and the multiplicatively fused forecaster.

pub mod config;
pub mod fusion;
pub mod model;
pub mod prepare;
pub mod store;

pub use config::{
    build_spatial_cnn, build_temporal_cnn, Donor, DonorConfig, SpatialCnnConfig, TemporalCnnConfig, FUSION_WIDTH,
    TAP_LAYER,
};
pub use fusion::{fuse_backward, fuse_forward, FusionConfig, FusionHead, FusionWeights};
pub use model::{
    align_streams, bank_samples, evaluate_donor, evaluate_fused, fit_fused, train_donor, train_fused, BankSample,
    FusedModel, FusedSample, FusedTrainOptions,
};
pub use prepare::{DatedInput, DatedTarget, Prepared, Scalers};
