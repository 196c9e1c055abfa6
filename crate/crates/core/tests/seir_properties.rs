use chrono::NaiveDate;
use epifuse::baselines::{simulate_extended_seir, simulate_seir, SeirParams, SeirState, Trajectory};
use proptest::prelude::*;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 2).unwrap()
}

fn bits(t: &Trajectory) -> Vec<u64> {
    t.days
        .iter()
        .flat_map(|s| [s.s, s.e, s.i, s.r, s.t])
        .chain(t.daily_new_cases.iter().copied())
        .map(f64::to_bits)
        .collect()
}

fn max_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn population_is_conserved_over_200_days() {
    let p = SeirParams::default();
    let init = SeirState::seeded(p.population, 2000.0, 1000.0);
    let traj = simulate_seir(&init, &p, 200, 0.25).unwrap();
    assert_eq!(traj.days.len(), 201);
    for s in &traj.days {
        assert!((s.total() - p.population).abs() <= 1e-9 * p.population, "{s:?}");
    }
}

#[test]
fn halving_the_step_shrinks_error_about_sixteenfold() {
    let p = SeirParams::default();
    let init = SeirState::seeded(p.population, 2000.0, 1000.0);
    let reference = simulate_seir(&init, &p, 60, 1.0 / 64.0).unwrap().infectious();
    let err = |dt| max_error(&simulate_seir(&init, &p, 60, dt).unwrap().infectious(), &reference);
    let factor = err(0.5) / err(0.25);
    assert!((8.0..=32.0).contains(&factor), "factor {factor}");
}

#[test]
fn extended_without_checkpoints_is_plain_seir() {
    let p = SeirParams::default();
    let init = SeirState::seeded(p.population, 2000.0, 1000.0);
    let plain = simulate_seir(&init, &p, 200, 0.25).unwrap();
    let ext = simulate_extended_seir(&init, &p, &[], start(), 200, 0.25).unwrap();
    assert_eq!(bits(&plain), bits(&ext));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compartments_stay_nonnegative_and_conserved(
        beta in 0.0..2.0f64,
        sigma in 0.05..1.0f64,
        gamma in 0.05..1.0f64,
        seed_frac in 1e-5..1e-2f64,
    ) {
        let p = SeirParams { beta, sigma, gamma, population: 1e6 };
        let init = SeirState::seeded(p.population, seed_frac * 1e6, seed_frac * 1e6);
        let traj = simulate_seir(&init, &p, 120, 0.25).unwrap();
        for s in &traj.days {
            prop_assert!(s.s >= -1e-6 && s.e >= -1e-6 && s.i >= -1e-6 && s.r >= -1e-6);
            prop_assert!((s.total() - p.population).abs() <= 1e-9 * p.population);
        }
        prop_assert!(traj.daily_new_cases.iter().all(|&c| c >= -1e-6));
        // S only falls
        for w in traj.days.windows(2) {
            prop_assert!(w[1].s <= w[0].s + 1e-9);
        }
    }

    #[test]
    fn zero_transmission_freezes_susceptibles(sigma in 0.05..1.0f64, gamma in 0.05..1.0f64) {
        let p = SeirParams { beta: 0.0, sigma, gamma, population: 1e5 };
        let init = SeirState::seeded(p.population, 100.0, 50.0);
        let traj = simulate_seir(&init, &p, 50, 0.5).unwrap();
        prop_assert!(traj.days.iter().all(|s| s.s == init.s));
    }
}

#[test]
fn invalid_parameters_rejected() {
    let p = SeirParams {
        beta: -0.1,
        ..SeirParams::default()
    };
    let init = SeirState::seeded(p.population, 10.0, 10.0);
    assert!(simulate_seir(&init, &p, 10, 0.25).is_err());
}
