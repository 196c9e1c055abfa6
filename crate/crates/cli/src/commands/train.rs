use std::ops::Range;
use std::path::Path;

use epifuse::data::split_dataset;
use epifuse::forecast::store::{load_donor, save_donor, save_fused};
use epifuse::forecast::{evaluate_donor, Donor, DonorConfig};
use epifuse::harness::{train_all, train_fusion, train_spatial, train_temporal, Scores, Split, TrainConfig};
use epifuse::Error;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{load_dataset, require_file, write_json, FUSED_FILE, SPATIAL_FILE, TEMPORAL_FILE, TRAIN_REPORT};
use crate::config::RunConfig;
use crate::error::{CliError, Context, Result};
use crate::manifest::Manifest;
use crate::{ModelArg, TrainArgs};

/// Held-out MAEs (normalized scale) of whatever was trained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub data_fingerprint: String,
    pub split: [usize; 3],
    pub window: usize,
    pub temporal: Option<Scores>,
    pub spatial: Option<Scores>,
    pub fused: Option<Scores>,
    pub parameters: Option<usize>,
}

fn apply_flags(c: &mut TrainConfig, args: &TrainArgs) -> Result<()> {
    let pair = |v: &Vec<usize>, flag: &str| -> Result<(usize, usize)> {
        if v.contains(&0) {
            return Err(CliError::Usage(format!("{flag} sizes must be positive")));
        }
        Ok((v[0], v[1]))
    };
    if let Some(k) = &args.kernel1 {
        let k = pair(k, "--kernel1")?;
        c.temporal.kernel1 = k;
        c.spatial.kernel1 = k;
    }
    if let Some(k) = &args.kernel2 {
        let k = pair(k, "--kernel2")?;
        c.temporal.kernel2 = k;
        c.spatial.kernel2 = k;
    }
    if let Some(f) = &args.filters {
        let (a, b) = pair(f, "--filters")?;
        c.temporal.filters1 = a;
        c.temporal.filters2 = b;
        c.spatial.filters1 = a;
        c.spatial.filters2 = b;
    }
    if let Some(w) = args.window {
        c.temporal.window_size = w;
    }
    if let Some(e) = args.epochs {
        c.donor_train.epochs = e;
        c.fused_train.train.epochs = e;
    }
    if let Some(lr) = args.lr {
        c.donor_train.learning_rate = lr;
        c.fused_train.train.learning_rate = lr;
    }
    Ok(())
}

/// Explains a split failure in terms of supervised pairs before passing on
/// the core error.
fn split(ds: &epifuse::data::Dataset, c: &TrainConfig) -> Result<Split> {
    let days = ds.len();
    let window = c.window();
    if let Err(e) = split_dataset(days, window) {
        let pairs = days.saturating_sub(window);
        return Err(CliError::Core {
            module: "train",
            op: "split",
            source: Error::Precondition {
                op: "windowing",
                msg: format!("{days} days with window {window} leave {pairs} supervised pairs; {e}"),
            },
        });
    }
    Split::new(ds, &c.targets, window).ctx("train", "split")
}

fn scores(split: &Split, donor: &Donor) -> Result<Scores> {
    let p = &split.prepared;
    let eval = |r: Range<usize>| -> epifuse::Result<f64> {
        let days = split.days(r);
        let ex = match donor.config {
            DonorConfig::Temporal(_) => p.temporal_examples(&days, split.window)?,
            DonorConfig::Spatial(_) => p.spatial_examples(&days),
        };
        evaluate_donor(donor, &ex)
    };
    Ok(Scores {
        test: eval(split.ranges.test.clone()).ctx("forecast", "evaluate_donor")?,
        validation: eval(split.ranges.validation.clone()).ctx("forecast", "evaluate_donor")?,
    })
}

fn load_pretrained(dir: &Path, name: &str, split: &Split) -> Result<Donor> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(CliError::Core {
            module: "train",
            op: "fused",
            source: Error::Precondition {
                op: "load_donors",
                msg: format!(
                    "pre-trained donor {} not found; train --model temporal and --model spatial first",
                    path.display()
                ),
            },
        });
    }
    let (donor, scalers) = load_donor(&path).ctx("forecast", "load_donor")?;
    if scalers.as_ref() != Some(&split.prepared.scalers) {
        return Err(CliError::Core {
            module: "train",
            op: "fused",
            source: Error::Precondition {
                op: "load_donors",
                msg: format!("{} was trained on other data or targets", path.display()),
            },
        });
    }
    Ok(donor)
}

pub fn train(config: &mut RunConfig, args: &TrainArgs, out: &Path) -> Result<()> {
    let mut c = config.train.clone();
    apply_flags(&mut c, args)?;
    let donors_dir = args.donors.clone().unwrap_or_else(|| out.to_path_buf());
    if args.model == ModelArg::Fused {
        // the donor files fix the window
        let path = donors_dir.join(TEMPORAL_FILE);
        if path.is_file() {
            if let (
                Donor {
                    config: DonorConfig::Temporal(t),
                    ..
                },
                _,
            ) = load_donor(&path).ctx("forecast", "load_donor")?
            {
                c.temporal.window_size = t.window_size;
            }
        }
    }
    config.train = c.clone();
    let ds = load_dataset(&args.data, config)?;
    let seed = config.seed;
    let mut manifest = Manifest::new(
        "train",
        config,
        json!({
            "model": format!("{:?}", args.model).to_lowercase(),
            "kernel1": args.kernel1, "kernel2": args.kernel2, "filters": args.filters,
            "window": args.window, "epochs": args.epochs, "lr": args.lr,
        }),
    );
    manifest.input_dir("data", &args.data)?;

    let split = split(&ds, &c)?;
    let scalers = split.prepared.scalers.clone();
    let mut summary = TrainSummary {
        seed,
        data_fingerprint: ds.fingerprint(),
        split: [
            split.ranges.train.len(),
            split.ranges.test.len(),
            split.ranges.validation.len(),
        ],
        window: split.window,
        temporal: None,
        spatial: None,
        fused: None,
        parameters: None,
    };
    let mut written = Vec::new();
    match args.model {
        ModelArg::Temporal => {
            let (d, s, _) = train_temporal(&split, &c, seed).ctx("train", "temporal")?;
            save_donor(&out.join(TEMPORAL_FILE), &d, Some(&scalers)).ctx("forecast", "save_donor")?;
            summary.temporal = Some(s);
            written.push(TEMPORAL_FILE);
        }
        ModelArg::Spatial => {
            let (d, s, _) = train_spatial(&split, &c, seed).ctx("train", "spatial")?;
            save_donor(&out.join(SPATIAL_FILE), &d, Some(&scalers)).ctx("forecast", "save_donor")?;
            summary.spatial = Some(s);
            written.push(SPATIAL_FILE);
        }
        ModelArg::Fused => {
            let t = load_pretrained(&donors_dir, TEMPORAL_FILE, &split)?;
            let s = load_pretrained(&donors_dir, SPATIAL_FILE, &split)?;
            manifest.input_file("donors", &donors_dir.join(TEMPORAL_FILE))?;
            manifest.input_file("donors", &donors_dir.join(SPATIAL_FILE))?;
            summary.temporal = Some(scores(&split, &t)?);
            summary.spatial = Some(scores(&split, &s)?);
            let (model, f, _) = train_fusion(&split, t, s, &c, seed).ctx("train", "fused")?;
            save_fused(&out.join(FUSED_FILE), &model, Some(&scalers)).ctx("forecast", "save_fused")?;
            summary.fused = Some(f);
            summary.parameters = Some(model.parameter_count());
            written.push(FUSED_FILE);
        }
        ModelArg::All => {
            let (_, model, report) = train_all(&ds, &c, seed).ctx("train", "train_all")?;
            save_donor(&out.join(TEMPORAL_FILE), &model.temporal, Some(&scalers)).ctx("forecast", "save_donor")?;
            save_donor(&out.join(SPATIAL_FILE), &model.spatial, Some(&scalers)).ctx("forecast", "save_donor")?;
            save_fused(&out.join(FUSED_FILE), &model, Some(&scalers)).ctx("forecast", "save_fused")?;
            summary.temporal = Some(report.temporal);
            summary.spatial = Some(report.spatial);
            summary.fused = Some(report.fused);
            summary.parameters = Some(model.parameter_count());
            written.extend([TEMPORAL_FILE, SPATIAL_FILE, FUSED_FILE]);
        }
    }
    write_json(out, TRAIN_REPORT, &summary)?;
    written.push(TRAIN_REPORT);

    println!(
        "split {}/{}/{} days, window {}",
        summary.split[0], summary.split[1], summary.split[2], summary.window
    );
    println!("{:<10} {:>12} {:>12}", "model", "test MAE", "valid. MAE");
    for (name, s) in [
        ("CNN-T", summary.temporal),
        ("CNN-S", summary.spatial),
        ("Fused-CNN", summary.fused),
    ] {
        if let Some(s) = s {
            println!("{name:<10} {:>12.6} {:>12.6}", s.test, s.validation);
        }
    }
    for f in written {
        manifest.output(out, f)?;
    }
    manifest.write(out)
}

/// Loads a training summary written by [`train`].
pub fn load_summary(path: &Path) -> Result<TrainSummary> {
    require_file(path, "training report")?;
    super::read_json(path)
}
