use std::path::Path;

use epifuse::harness::{
    ablation_targets, enkf_grid, enkf_sweep, fusion_summary, kernel_recovery_search, ExperimentReport, Provenance,
    Split, TwinHorizon,
};
use serde_json::json;

use super::train::load_summary;
use super::{check_scalers, load_dataset, load_model, usage, FUSED_FILE, TRAIN_REPORT};
use crate::config::RunConfig;
use crate::error::{Context, Result};
use crate::manifest::Manifest;
use crate::{ReportArgs, ReportKind};

fn emit(report: &ExperimentReport, out: &Path, stem: &str, manifest: &mut Manifest) -> Result<()> {
    report.write(out, stem).ctx("harness", "write_report")?;
    print!("{}", report.to_text());
    for ext in ["csv", "txt", "json"] {
        manifest.output(out, &format!("{stem}.{ext}"))?;
    }
    Ok(())
}

pub fn report(config: &mut RunConfig, args: &ReportArgs, out: &Path) -> Result<()> {
    match &args.kind {
        ReportKind::Fusion { train_report } => {
            let path = train_report.clone().unwrap_or_else(|| out.join(TRAIN_REPORT));
            let s = load_summary(&path)?;
            let (Some(t), Some(sp), Some(f)) = (s.temporal, s.spatial, s.fused) else {
                return Err(usage(format!(
                    "{} lacks one of CNN-T, CNN-S and Fused-CNN; train --model all first",
                    path.display()
                )));
            };
            let prov = Provenance::new(
                s.seed,
                s.data_fingerprint.clone(),
                "MAE on the test range, normalized scale, averaged over targets",
            );
            let report = fusion_summary(t.test, sp.test, f.test, prov).ctx("harness", "fusion_summary")?;
            let mut manifest = Manifest::new("report fusion", config, json!({}));
            manifest.input_file("train_report", &path)?;
            emit(&report, out, "fusion", &mut manifest)?;
            manifest.write(out)
        }
        ReportKind::Ablation { data, folds } => {
            if let Some(k) = folds {
                config.cv.folds = *k;
            }
            let ds = load_dataset(data, config)?;
            let report =
                ablation_targets(&ds, &config.train, &config.cv, config.seed).ctx("harness", "ablation_targets")?;
            let mut manifest = Manifest::new("report ablation", config, json!({ "folds": folds }));
            manifest.input_dir("data", data)?;
            emit(&report, out, "ablation", &mut manifest)?;
            manifest.write(out)
        }
        ReportKind::Enkf { data, model_file } => {
            let model_path = model_file.clone().unwrap_or_else(|| out.join(FUSED_FILE));
            let loaded = load_model(&model_path)?;
            let ds = load_dataset(data, config)?;
            let split = Split::new(&ds, loaded.model.targets(), loaded.window).ctx("assim", "split")?;
            check_scalers(&loaded.scalers, &split.prepared.scalers);
            let origin = split.ranges.test.start - 1;
            let horizon = TwinHorizon::new(&split, origin, 0.0, config.seed).ctx("assim", "horizon")?;
            let report = enkf_sweep(
                &horizon,
                &loaded.model,
                &enkf_grid(),
                &config.enkf,
                config.seed,
                &ds.fingerprint(),
            )
            .ctx("harness", "enkf_sweep")?;
            let mut manifest = Manifest::new("report enkf", config, json!({}));
            manifest.input_dir("data", data)?;
            manifest.input_file("model", &model_path)?;
            emit(&report, out, "enkf", &mut manifest)?;
            manifest.write(out)
        }
        ReportKind::KernelRecovery => {
            let report = kernel_recovery_search(&config.kernel_recovery, config.seed)
                .ctx("harness", "kernel_recovery_search")?;
            let mut manifest = Manifest::new("report kernel-recovery", config, json!({}));
            emit(&report, out, "kernel_recovery", &mut manifest)?;
            manifest.write(out)
        }
    }
}
