//! Experiment orchestration: cross-validation, grid search, ablations,
//! filter sweeps and report emission.

pub mod cv;
pub mod experiments;
pub mod grid;
pub mod pipeline;
pub mod report;
pub mod synthetic;
pub mod tables;

pub use cv::{blocked_folds, cross_validate, cross_validate_with, CvResult, Fold, CV_PROTOCOL};
pub use experiments::{
    fusion_advantage, misparameterize, seir_reported_cases, twin_experiment, FusionAdvantage, FusionAdvantageConfig,
    TwinConfig, TwinHorizon, TwinOutcome,
};
pub use grid::{grid_search, grid_search_with, Axis, GridPoint, GridSpec, PointScore};
pub use pipeline::{train_all, train_fusion, train_spatial, train_temporal, Scores, Split, TrainConfig, TrainReport};
pub use report::{compare_rows, ExperimentReport, Provenance, ReportRow};
pub use synthetic::{multiplicative_samples, planted_kernel_samples, MultiplicativeSpec, PlantedKernelSpec};
pub use tables::{
    ablation_label, ablation_targets, apply_point, donor_cv, donor_grid_search, enkf_grid, enkf_sweep, fusion_summary,
    kernel_recovery_search, temporal_architecture_grid, CvConfig, DonorKind, KernelRecoveryConfig,
};
