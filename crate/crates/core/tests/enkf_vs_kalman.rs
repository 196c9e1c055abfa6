//! The stochastic ensemble filter against the closed-form Kalman filter on a
//! linear-Gaussian system with identity observations.
//!
//! With no process noise the covariance only stays away from zero when the
//! dynamics expand, so the system is a rotation scaled by 2. The true state
//! sits at the origin to keep the trajectory bounded.

use epifuse::assim::{run_filter_with, EnkfConfig, InitMode, LinearModel, NoiseSpec};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Exact {
    means: Vec<DVector<f64>>,
    gains: Vec<DMatrix<f64>>,
}

fn kalman(a: &DMatrix<f64>, r: &DMatrix<f64>, p0: DMatrix<f64>, x0: DVector<f64>, obs: &[Vec<f64>]) -> Exact {
    let (mut x, mut p) = (x0, p0);
    let mut out = Exact {
        means: vec![],
        gains: vec![],
    };
    for y in obs {
        let k = &p * (&p + r).try_inverse().unwrap();
        x = &x + &k * (DVector::from_column_slice(y) - &x);
        p = (DMatrix::identity(2, 2) - &k) * &p;
        out.means.push(x.clone());
        out.gains.push(k);
        x = a * &x;
        p = a * &p * a.transpose();
    }
    out
}

fn system() -> (DMatrix<f64>, DMatrix<f64>) {
    let (c, s) = (0.2f64.cos(), 0.2f64.sin());
    let a = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]) * 2.0;
    let r = DMatrix::from_row_slice(2, 2, &[0.25, 0.05, 0.05, 0.2]);
    (a, r)
}

fn observations(a: &DMatrix<f64>, r: &DMatrix<f64>, steps: usize, seed: u64) -> (Vec<DVector<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = r.clone().cholesky().unwrap().l();
    let mut x = DVector::from_column_slice(&[0.0, 0.0]);
    let (mut truth, mut obs) = (vec![], vec![]);
    for _ in 0..steps {
        let e = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
        obs.push((&x + &l * e).iter().copied().collect());
        truth.push(x.clone());
        x = a * &x;
    }
    (truth, obs)
}

fn rmse(est: &[DVector<f64>], truth: &[DVector<f64>]) -> f64 {
    let ss: f64 = est.iter().zip(truth).map(|(e, t)| (e - t).norm_squared()).sum();
    (ss / (2 * est.len()) as f64).sqrt()
}

#[test]
fn large_ensemble_tracks_exact_gain_and_trajectory() {
    let (a, r) = system();
    let (truth, obs) = observations(&a, &r, 50, 11);
    let cfg = EnkfConfig {
        ensemble_size: 500,
        init_mode: InitMode::Zero,
        ..EnkfConfig::default()
    };
    let noise = NoiseSpec::new(r.clone(), 1.0).unwrap();
    let model = LinearModel {
        a: a.clone(),
        c: DVector::zeros(2),
    };
    let run = run_filter_with(&cfg, &noise, &model, &obs, None, 12).unwrap();
    let exact = kalman(&a, &r, DMatrix::identity(2, 2), DVector::zeros(2), &obs);

    let worst = run
        .gains
        .iter()
        .zip(&exact.gains)
        .map(|(k, e)| (k - e).norm() / e.norm())
        .fold(0.0, f64::max);
    assert!(worst < 0.10, "worst relative gain error {worst:.4}");

    let en: Vec<DVector<f64>> = run.analyses().iter().map(|v| DVector::from_column_slice(v)).collect();
    let (re, rk) = (rmse(&en, &truth), rmse(&exact.means, &truth));
    assert!((re - rk).abs() <= 0.10 * rk, "ensemble {re:.4} vs exact {rk:.4}");
}

#[test]
fn gain_error_shrinks_with_ensemble_size() {
    let (a, r) = system();
    let (_, obs) = observations(&a, &r, 20, 3);
    let noise = NoiseSpec::new(r.clone(), 1.0).unwrap();
    let model = LinearModel {
        a: a.clone(),
        c: DVector::zeros(2),
    };
    let exact = kalman(&a, &r, DMatrix::identity(2, 2), DVector::zeros(2), &obs);
    let mean_err = |m: usize| {
        (0..8)
            .map(|seed| {
                let cfg = EnkfConfig {
                    ensemble_size: m,
                    ..EnkfConfig::default()
                };
                let run = run_filter_with(&cfg, &noise, &model, &obs, None, seed).unwrap();
                run.gains
                    .iter()
                    .zip(&exact.gains)
                    .map(|(k, e)| (k - e).norm() / e.norm())
                    .sum::<f64>()
                    / obs.len() as f64
            })
            .sum::<f64>()
            / 8.0
    };
    let (small, large) = (mean_err(25), mean_err(400));
    // error scales like 1/sqrt(m): a 16x larger ensemble should cut it well over half
    assert!(large < 0.5 * small, "m=25: {small:.4}, m=400: {large:.4}");
}

#[test]
fn filter_beats_free_run_on_linear_twin() {
    let (c, s) = (0.15f64.cos(), 0.15f64.sin());
    let a = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let r = DMatrix::identity(2, 2) * 0.1;
    let model = LinearModel {
        a: a.clone(),
        c: DVector::zeros(2),
    };
    let mut wins = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut x = DVector::from_fn(2, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            2.0 * z
        });
        let (mut truth, mut obs) = (vec![], vec![]);
        for _ in 0..50 {
            let e = DVector::from_fn(2, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.1f64.sqrt() * z
            });
            obs.push((&x + e).iter().copied().collect::<Vec<f64>>());
            truth.push(x.clone());
            x = &a * &x;
        }
        let run = run_filter_with(
            &EnkfConfig::default(),
            &NoiseSpec::new(r.clone(), 1.0).unwrap(),
            &model,
            &obs,
            None,
            seed,
        )
        .unwrap();
        let filtered: Vec<DVector<f64>> = run.analyses().iter().map(|v| DVector::from_column_slice(v)).collect();
        let mut free = vec![DVector::zeros(2)];
        for k in 1..50 {
            free.push(&a * &free[k - 1]);
        }
        if rmse(&filtered, &truth) < rmse(&free, &truth) {
            wins += 1;
        }
    }
    assert!(wins >= 9, "filter won {wins}/10");
}
