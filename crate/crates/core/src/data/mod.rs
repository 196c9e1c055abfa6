//! Ingestion, gap filling, normalization, windowing and synthetic streams.

pub mod correlation;
pub mod dataset;
pub mod density;
pub mod normalize;
pub mod split;
pub mod synth;
pub mod temporal;
pub mod truth;
pub mod window;

pub use correlation::{correlation_matrix, CorrelationMatrix};
pub use dataset::Dataset;
pub use density::{load_density_frames, write_density_day, DensityFrame, FrameFormat, GridShape};
pub use normalize::Normalizer;
pub use split::{split_dataset, DatasetSplit};
pub use synth::{synthesize_streams, DaySnapshots, SynthConfig, SyntheticDataset};
pub use temporal::{interpolate_missing, load_temporal, write_temporal, TemporalRecord, N_FEATURES};
pub use truth::{load_truth, write_truth, GroundTruth, Target};
pub use window::{sliding_windows, window_sequences, SupervisedPair, TemporalWindow};
