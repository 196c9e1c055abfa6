use epifuse::data::{synthesize_streams, GridShape, SynthConfig};
use epifuse::forecast::evaluate_fused;
use epifuse::forecast::store::{load_donor, load_fused, save_donor, save_fused};
use epifuse::harness::{train_all, train_temporal, Split, TrainConfig};

fn quick() -> TrainConfig {
    let mut c = TrainConfig::small();
    c.donor_train.epochs = 5;
    c.fused_train.train.epochs = 5;
    c
}

fn dataset() -> epifuse::data::Dataset {
    let cfg = SynthConfig {
        days: 90,
        grid: GridShape { rows: 10, cols: 12 },
        ..SynthConfig::default()
    };
    synthesize_streams(&cfg, 4).unwrap().to_dataset().unwrap()
}

#[test]
fn training_is_deterministic() {
    let ds = dataset();
    let (_, a, ra) = train_all(&ds, &quick(), 11).unwrap();
    let (_, b, rb) = train_all(&ds, &quick(), 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let (_, _, rc) = train_all(&ds, &quick(), 12).unwrap();
    assert_ne!(ra.fused_loss, rc.fused_loss);
}

#[test]
fn thread_count_does_not_change_training() {
    let ds = dataset();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train_all(&ds, &quick(), 3).unwrap().2)
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn saved_models_reload_exactly() {
    let ds = dataset();
    let (split, model, report) = train_all(&ds, &quick(), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fused.epif");
    save_fused(&path, &model, Some(&split.prepared.scalers)).unwrap();
    let (back, scalers) = load_fused(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(scalers.as_ref(), Some(&split.prepared.scalers));
    let test = split.fused_samples(split.ranges.test.clone()).unwrap();
    assert_eq!(evaluate_fused(&back, &test).unwrap(), report.fused.test);

    let (donor, _, _) = train_temporal(&split, &quick(), 5).unwrap();
    let dpath = dir.path().join("temporal.epif");
    save_donor(&dpath, &donor, None).unwrap();
    let (d2, s2) = load_donor(&dpath).unwrap();
    assert_eq!(d2, donor);
    assert!(s2.is_none());
}

#[test]
fn corrupted_model_file_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.epif");
    std::fs::write(&path, b"not a model").unwrap();
    assert!(load_fused(&path).is_err());
}

#[test]
fn losses_are_finite_and_training_helps() {
    let ds = dataset();
    let mut cfg = quick();
    cfg.donor_train.epochs = 30;
    let split = Split::new(&ds, &cfg.targets, cfg.window()).unwrap();
    let (_, _, losses) = train_temporal(&split, &cfg, 1).unwrap();
    assert!(losses.iter().all(|l| l.is_finite()));
    assert!(losses.last().unwrap() < losses.first().unwrap(), "{losses:?}");
}
