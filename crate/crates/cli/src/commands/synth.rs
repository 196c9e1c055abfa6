use std::path::Path;

use epifuse::data::{synthesize_streams, FrameFormat, GridShape};
use serde_json::json;

use super::{usage, write_json, DatasetMeta, DATASET_META};
use crate::config::RunConfig;
use crate::error::{Context, Result};
use crate::manifest::{files_under, Manifest, MANIFEST};
use crate::{FormatArg, SynthArgs};

pub fn synth(config: &mut RunConfig, args: &SynthArgs, out: &Path) -> Result<()> {
    let synth = &mut config.synth;
    if let Some(days) = args.days {
        synth.days = days;
    }
    if let Some(g) = &args.grid {
        if g.contains(&0) {
            return Err(usage("--grid needs two positive sizes"));
        }
        synth.grid = GridShape { rows: g[0], cols: g[1] };
    }
    if let Some(f) = args.format {
        synth.frame_format = match f {
            FormatArg::Csv => FrameFormat::Csv,
            FormatArg::Epif => FrameFormat::Epif,
        };
    }
    synth.validate().ctx("data", "synthesize_streams")?;
    let data = synthesize_streams(synth, config.seed).ctx("data", "synthesize_streams")?;
    data.write(out, synth.frame_format).ctx("data", "write_dataset")?;
    let meta = DatasetMeta {
        grid: synth.grid,
        start: synth.start,
        days: synth.days,
        frame_format: synth.frame_format,
    };
    write_json(out, DATASET_META, &meta)?;
    log::info!("wrote {} days on a {} grid", synth.days, synth.grid);

    let mut manifest = Manifest::new(
        "synth",
        config,
        json!({ "days": args.days, "grid": args.grid, "format": args.format.map(|f| format!("{f:?}").to_lowercase()) }),
    );
    for rel in files_under(out)? {
        let rel = rel.to_string_lossy().replace('\\', "/");
        if rel != MANIFEST {
            manifest.output(out, &rel)?;
        }
    }
    manifest.write(out)
}
