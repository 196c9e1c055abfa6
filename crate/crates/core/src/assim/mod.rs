//! State estimation around a forecaster: an ensemble Kalman filter, forward
//! models that drive it, and filter reports.

pub mod enkf;
pub mod surrogate;

pub use enkf::{
    analysis_update, forecast_step, free_run, initial_ensemble, kalman_gain, normalized_anomalies,
    perturb_observations, run_filter, run_filter_with, sample_perturbations, select_estimate, EnkfConfig,
    EnsembleState, FilterDay, FilterRun, ForwardModel, InitMode, LinearModel, NoiseSpec, Selection, GAIN_RIDGE,
};
pub use surrogate::{write_filter_csv, FusedForward, FILTER_CSV_HEADER};
