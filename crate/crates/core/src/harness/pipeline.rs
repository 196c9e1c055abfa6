//! Train-everything pipeline: split, normalize, fit both donors, then the
//! fused head, scoring each on the test and validation ranges.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::{split_dataset, Dataset, DatasetSplit, GridShape, Target};
use crate::error::{Error, Result};
use crate::forecast::{
    align_streams, build_spatial_cnn, build_temporal_cnn, evaluate_donor, evaluate_fused, train_donor, train_fused,
    Donor, FusedModel, FusedSample, FusedTrainOptions, FusionConfig, Prepared, SpatialCnnConfig, TemporalCnnConfig,
};
use crate::nn::TrainOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Predicted states; overrides the donor configs' own lists.
    pub targets: Vec<Target>,
    pub temporal: TemporalCnnConfig,
    /// The grid is taken from the dataset.
    pub spatial: SpatialCnnConfig,
    pub fusion: FusionConfig,
    pub donor_train: TrainOptions,
    pub fused_train: FusedTrainOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            targets: Target::ALL.to_vec(),
            temporal: TemporalCnnConfig::default(),
            spatial: SpatialCnnConfig::default(),
            fusion: FusionConfig::default(),
            donor_train: TrainOptions::default(),
            fused_train: FusedTrainOptions::default(),
        }
    }
}

impl TrainConfig {
    /// Narrow networks that train in seconds on small grids.
    pub fn small() -> Self {
        Self {
            targets: Target::ALL.to_vec(),
            temporal: TemporalCnnConfig {
                kernel1: (3, 3),
                kernel2: (3, 3),
                filters1: 4,
                filters2: 8,
                fc_sizes: [16, 16, 64],
                ..TemporalCnnConfig::default()
            },
            spatial: SpatialCnnConfig {
                kernel1: (3, 3),
                kernel2: (3, 3),
                filters1: 4,
                filters2: 8,
                fc_sizes: [16, 16, 16, 64],
                ..SpatialCnnConfig::default()
            },
            fusion: FusionConfig {
                length: 16,
                k_out: 8,
                ..FusionConfig::default()
            },
            donor_train: TrainOptions {
                epochs: 60,
                learning_rate: 0.01,
                batch_size: 8,
                ..TrainOptions::default()
            },
            fused_train: FusedTrainOptions {
                train: TrainOptions {
                    epochs: 150,
                    learning_rate: 0.01,
                    batch_size: 8,
                    ..TrainOptions::default()
                },
                fine_tune: false,
            },
        }
    }

    pub fn window(&self) -> usize {
        self.temporal.window_size
    }

    /// Donor configs with the shared targets and the dataset's grid applied.
    pub fn resolved(&self, grid: GridShape) -> (TemporalCnnConfig, SpatialCnnConfig) {
        let temporal = TemporalCnnConfig {
            targets: self.targets.clone(),
            ..self.temporal.clone()
        };
        let spatial = SpatialCnnConfig {
            targets: self.targets.clone(),
            grid,
            ..self.spatial.clone()
        };
        (temporal, spatial)
    }
}

/// Normalized data with its chronological split.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub prepared: Prepared,
    pub ranges: DatasetSplit,
    pub window: usize,
}

impl Split {
    pub fn new(ds: &Dataset, targets: &[Target], window: usize) -> Result<Self> {
        let ranges = split_dataset(ds.len(), window)?;
        let prepared = Prepared::new(ds, targets, ranges.train.clone())?;
        Ok(Self {
            prepared,
            ranges,
            window,
        })
    }

    pub fn days(&self, range: Range<usize>) -> Vec<usize> {
        self.prepared.prediction_days(range, self.window)
    }

    pub fn fused_samples(&self, range: Range<usize>) -> Result<Vec<FusedSample>> {
        let (t, s, g) = self.prepared.fused_streams(&self.days(range), self.window)?;
        align_streams(&t, &s, &g)
    }

    pub fn grid(&self) -> GridShape {
        let shape = self.prepared.frames[0].shape();
        GridShape {
            rows: shape[0],
            cols: shape[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub test: f64,
    pub validation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub temporal: Scores,
    pub spatial: Scores,
    pub fused: Scores,
    pub temporal_loss: Vec<f64>,
    pub spatial_loss: Vec<f64>,
    pub fused_loss: Vec<f64>,
}

fn derived(opts: &TrainOptions, seed: u64, salt: u64) -> TrainOptions {
    TrainOptions {
        seed: seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt),
        ..opts.clone()
    }
}

/// Trains a standalone donor on the training range and scores it.
pub fn train_temporal(split: &Split, config: &TrainConfig, seed: u64) -> Result<(Donor, Scores, Vec<f64>)> {
    let (cfg, _) = config.resolved(split.grid());
    if cfg.window_size != split.window {
        return Err(Error::config("temporal window differs from the split window"));
    }
    let mut donor = build_temporal_cnn(&cfg, seed.wrapping_add(1))?;
    let p = &split.prepared;
    let ex = |r: Range<usize>| p.temporal_examples(&split.days(r), split.window);
    let loss = train_donor(
        &mut donor,
        &ex(split.ranges.train.clone())?,
        &derived(&config.donor_train, seed, 1),
    )?;
    let scores = Scores {
        test: evaluate_donor(&donor, &ex(split.ranges.test.clone())?)?,
        validation: evaluate_donor(&donor, &ex(split.ranges.validation.clone())?)?,
    };
    Ok((donor, scores, loss))
}

pub fn train_spatial(split: &Split, config: &TrainConfig, seed: u64) -> Result<(Donor, Scores, Vec<f64>)> {
    let (_, cfg) = config.resolved(split.grid());
    let mut donor = build_spatial_cnn(&cfg, seed.wrapping_add(2))?;
    let p = &split.prepared;
    let ex = |r: Range<usize>| p.spatial_examples(&split.days(r));
    let loss = train_donor(
        &mut donor,
        &ex(split.ranges.train.clone()),
        &derived(&config.donor_train, seed, 2),
    )?;
    let scores = Scores {
        test: evaluate_donor(&donor, &ex(split.ranges.test.clone()))?,
        validation: evaluate_donor(&donor, &ex(split.ranges.validation.clone()))?,
    };
    Ok((donor, scores, loss))
}

/// Fits the fusion head over two pre-trained donors.
pub fn train_fusion(
    split: &Split,
    temporal: Donor,
    spatial: Donor,
    config: &TrainConfig,
    seed: u64,
) -> Result<(FusedModel, Scores, Vec<f64>)> {
    let mut model = FusedModel::new(temporal, spatial, &config.fusion, seed.wrapping_add(3))?;
    let (t, s, g) = split
        .prepared
        .fused_streams(&split.days(split.ranges.train.clone()), split.window)?;
    let opts = FusedTrainOptions {
        train: derived(&config.fused_train.train, seed, 3),
        fine_tune: config.fused_train.fine_tune,
    };
    let loss = train_fused(&mut model, &t, &s, &g, &opts)?;
    let scores = Scores {
        test: evaluate_fused(&model, &split.fused_samples(split.ranges.test.clone())?)?,
        validation: evaluate_fused(&model, &split.fused_samples(split.ranges.validation.clone())?)?,
    };
    Ok((model, scores, loss))
}

/// Splits, trains CNN-T, CNN-S and the fused model. The donors train in
/// parallel; each step draws a seed derived from `seed`.
pub fn train_all(ds: &Dataset, config: &TrainConfig, seed: u64) -> Result<(Split, FusedModel, TrainReport)> {
    let split = Split::new(ds, &config.targets, config.window())?;
    let (t, s) = rayon::join(
        || train_temporal(&split, config, seed),
        || train_spatial(&split, config, seed),
    );
    let (t, t_scores, t_loss) = t?;
    let (s, s_scores, s_loss) = s?;
    let (model, f_scores, f_loss) = train_fusion(&split, t, s, config, seed)?;
    let report = TrainReport {
        temporal: t_scores,
        spatial: s_scores,
        fused: f_scores,
        temporal_loss: t_loss,
        spatial_loss: s_loss,
        fused_loss: f_loss,
    };
    Ok((split, model, report))
}
