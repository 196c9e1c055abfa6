//! Model files in the EPIF container.
//!
//! Configurations, the trained flag and the optional normalizers go in the
//! manifest; parameters are stored as tensors named `temporal.layer0.weights`,
//! `head.alpha`, and so on.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{Donor, DonorConfig};
use super::fusion::{FusionConfig, FusionHead, HeadShapes};
use super::model::FusedModel;
use super::prepare::Scalers;
use crate::container::Container;
use crate::error::{Error, Result};
use crate::tensor::Parameter;

pub const DONOR_KIND: &str = "donor-cnn";
pub const FUSED_KIND: &str = "fused-cnn";

#[derive(Serialize, Deserialize)]
struct DonorMeta {
    config: DonorConfig,
    trained: bool,
}

fn push_params<'a>(c: &mut Container, prefix: &str, params: impl IntoIterator<Item = (String, &'a Parameter)>) {
    for (name, p) in params {
        c.push(format!("{prefix}.{name}"), p.value.clone());
    }
}

fn fill_params<'a>(
    c: &Container,
    prefix: &str,
    names: Vec<String>,
    params: impl IntoIterator<Item = &'a mut Parameter>,
) -> Result<()> {
    for (name, p) in names.into_iter().zip(params) {
        let key = format!("{prefix}.{name}");
        let t = c
            .get(&key)
            .ok_or_else(|| Error::Container(format!("missing tensor '{key}'")))?;
        if t.shape() != p.shape() {
            return Err(Error::Container(format!(
                "tensor '{key}' has shape {:?}, expected {:?}",
                t.shape(),
                p.shape()
            )));
        }
        p.value = t.clone();
    }
    Ok(())
}

fn donor_meta(d: &Donor) -> serde_json::Value {
    json!({ "config": d.config, "trained": d.trained })
}

fn restore_donor(c: &Container, prefix: &str, meta: &serde_json::Value) -> Result<Donor> {
    let meta: DonorMeta = serde_json::from_value(meta.clone())?;
    let mut donor = Donor::build(meta.config, 0)?;
    donor.trained = meta.trained;
    let names = donor.network.named_parameters().into_iter().map(|(n, _)| n).collect();
    fill_params(c, prefix, names, donor.network.parameters_mut())?;
    Ok(donor)
}

fn scalers_from(meta: &serde_json::Value) -> Result<Option<Scalers>> {
    match meta.get("scalers") {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => Ok(Some(serde_json::from_value(v.clone())?)),
    }
}

pub fn save_donor(path: &Path, donor: &Donor, scalers: Option<&Scalers>) -> Result<()> {
    let mut c = Container::new(DONOR_KIND, json!({ "donor": donor_meta(donor), "scalers": scalers }));
    push_params(&mut c, "donor", donor.network.named_parameters());
    c.write(path)
}

pub fn load_donor(path: &Path) -> Result<(Donor, Option<Scalers>)> {
    let c = Container::read(path)?;
    if c.kind != DONOR_KIND {
        return Err(Error::file(
            path,
            format!("expected a {DONOR_KIND} file, found '{}'", c.kind),
        ));
    }
    let donor = restore_donor(&c, "donor", &c.meta["donor"]).map_err(|e| Error::file(path, e.to_string()))?;
    Ok((donor, scalers_from(&c.meta)?))
}

fn frozen(donor: &Donor) -> bool {
    donor.network.parameters().all(|p| !p.learnable)
}

pub fn save_fused(path: &Path, model: &FusedModel, scalers: Option<&Scalers>) -> Result<()> {
    let meta = json!({
        "temporal": donor_meta(&model.temporal),
        "spatial": donor_meta(&model.spatial),
        "fusion": model.head.config,
        "head_shapes": model.head.shapes,
        "frozen": [frozen(&model.temporal), frozen(&model.spatial)],
        "scalers": scalers,
    });
    let mut c = Container::new(FUSED_KIND, meta);
    push_params(&mut c, "temporal", model.temporal.network.named_parameters());
    push_params(&mut c, "spatial", model.spatial.network.named_parameters());
    push_params(&mut c, "head", model.head.named_parameters());
    c.write(path)
}

pub fn load_fused(path: &Path) -> Result<(FusedModel, Option<Scalers>)> {
    let c = Container::read(path)?;
    if c.kind != FUSED_KIND {
        return Err(Error::file(
            path,
            format!("expected a {FUSED_KIND} file, found '{}'", c.kind),
        ));
    }
    let inner = || -> Result<FusedModel> {
        let mut temporal = restore_donor(&c, "temporal", &c.meta["temporal"])?;
        let mut spatial = restore_donor(&c, "spatial", &c.meta["spatial"])?;
        // absent flags mean learnable donors
        let flags: [bool; 2] = serde_json::from_value(c.meta["frozen"].clone()).unwrap_or([false; 2]);
        temporal.set_frozen(flags[0]);
        spatial.set_frozen(flags[1]);
        let config: FusionConfig = serde_json::from_value(c.meta["fusion"].clone())?;
        let shapes: HeadShapes = serde_json::from_value(c.meta["head_shapes"].clone())?;
        let mut head = FusionHead::build(&config, shapes, &mut ChaCha8Rng::seed_from_u64(0))?;
        let names = head.named_parameters().into_iter().map(|(n, _)| n).collect();
        fill_params(&c, "head", names, head.parameters_mut())?;
        Ok(FusedModel {
            temporal,
            spatial,
            head,
        })
    };
    let model = inner().map_err(|e| Error::file(path, e.to_string()))?;
    Ok((model, scalers_from(&c.meta)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::config::{build_temporal_cnn, TemporalCnnConfig};
    use crate::forecast::fusion::FusionConfig;
    use crate::forecast::SpatialCnnConfig;

    #[test]
    fn fused_round_trip() {
        let t = build_temporal_cnn(
            &TemporalCnnConfig {
                window_size: 4,
                kernel1: (2, 2),
                kernel2: (2, 2),
                filters1: 2,
                filters2: 2,
                fc_sizes: [4, 4, 64],
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let s = Donor::build(
            DonorConfig::Spatial(SpatialCnnConfig {
                grid: crate::data::GridShape { rows: 8, cols: 8 },
                kernel1: (2, 2),
                kernel2: (2, 2),
                filters1: 2,
                filters2: 2,
                fc_sizes: [4, 4, 4, 64],
                ..Default::default()
            }),
            2,
        )
        .unwrap();
        let mut m = FusedModel::new(
            t,
            s,
            &FusionConfig {
                length: 8,
                k_out: 3,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        m.temporal.trained = true;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.epif");
        save_fused(&path, &m, None).unwrap();
        let (back, scalers) = load_fused(&path).unwrap();
        assert!(scalers.is_none());
        assert_eq!(back, m);
        assert!(load_donor(&path).is_err());

        let dpath = dir.path().join("d.epif");
        save_donor(&dpath, &m.temporal, None).unwrap();
        assert_eq!(load_donor(&dpath).unwrap().0, m.temporal);
    }
}
