//! Deterministic SEIR and the extended SEIR with dated parameter checkpoints.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeirParams {
    /// Transmission rate (1/day).
    pub beta: f64,
    /// Incubation rate E → I (1/day).
    pub sigma: f64,
    /// Recovery rate I → R (1/day).
    pub gamma: f64,
    /// Total population.
    pub population: f64,
}

impl Default for SeirParams {
    /// Assumed Greater London defaults; override for any real use.
    fn default() -> Self {
        Self {
            beta: 0.6,
            sigma: 1.0 / 5.2,
            gamma: 1.0 / 7.0,
            population: 8_900_000.0,
        }
    }
}

impl SeirParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.beta, self.sigma, self.gamma];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::config(format!("SEIR rates must be finite and ≥ 0: {self:?}")));
        }
        if !(self.population.is_finite() && self.population > 0.0) {
            return Err(Error::config("SEIR population must be positive"));
        }
        Ok(())
    }

    pub fn r0(&self) -> f64 {
        self.beta / self.gamma
    }

    /// Every rate scaled by `factor` (used for misparameterized baselines).
    pub fn scaled_rates(&self, factor: f64) -> Self {
        Self {
            beta: self.beta * factor,
            sigma: self.sigma * factor,
            gamma: self.gamma * factor,
            population: self.population,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeirState {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
    pub t: f64,
}

impl SeirState {
    /// Population `n` with `exposed` and `infectious` seeds, everyone else susceptible.
    pub fn seeded(n: f64, exposed: f64, infectious: f64) -> Self {
        Self {
            s: n - exposed - infectious,
            e: exposed,
            i: infectious,
            r: 0.0,
            t: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.s + self.e + self.i + self.r
    }

    fn validate(&self) -> Result<()> {
        let c = [self.s, self.e, self.i, self.r];
        if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config(format!(
                "SEIR compartments must be finite and ≥ 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `(dS, dE, dI, dR)` of the standard SEIR system.
pub fn seir_derivative(state: &SeirState, p: &SeirParams) -> [f64; 4] {
    let infection = p.beta * state.s * state.i / p.population;
    let onset = p.sigma * state.e;
    let recovery = p.gamma * state.i;
    [-infection, infection - onset, onset - recovery, recovery]
}

/// Daily samples of an SEIR run; `days[d]` is the state at day `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub days: Vec<SeirState>,
    /// `∫ σ E dt` over day `d − 1 → d`; entry 0 is 0.
    pub daily_new_cases: Vec<f64>,
}

impl Trajectory {
    pub fn infectious(&self) -> Vec<f64> {
        self.days.iter().map(|s| s.i).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::file(path, e.to_string()))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "day,S,E,I,R,daily_new_cases")?;
        for (d, (s, c)) in self.days.iter().zip(&self.daily_new_cases).enumerate() {
            writeln!(w, "{d},{:?},{:?},{:?},{:?},{c:?}", s.s, s.e, s.i, s.r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dated override of some SEIR parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamOverrides {
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
}

impl ParamOverrides {
    fn apply(&self, p: &SeirParams) -> SeirParams {
        SeirParams {
            beta: self.beta.unwrap_or(p.beta),
            sigma: self.sigma.unwrap_or(p.sigma),
            gamma: self.gamma.unwrap_or(p.gamma),
            population: p.population,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub date: NaiveDate,
    pub overrides: ParamOverrides,
}

/// Lockdown announcement and the end of social distancing in the UK.
pub fn default_checkpoint_dates() -> [NaiveDate; 2] {
    [
        NaiveDate::from_ymd_opt(2020, 3, 23).expect("valid date"),
        NaiveDate::from_ymd_opt(2020, 5, 10).expect("valid date"),
    ]
}

fn steps_per_day(dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt <= 0.5) {
        return Err(Error::config(format!("step size dt = {dt} must lie in (0, 0.5]")));
    }
    let steps = (1.0 / dt).round();
    if ((1.0 / dt) - steps).abs() > 1e-9 {
        return Err(Error::config(format!("step size dt = {dt} must divide one day")));
    }
    Ok(steps as usize)
}

/// Classical RK4 on `(S, E, I, R, C)` where `C' = σE` accumulates onsets.
fn rk4_step(y: &[f64; 5], p: &SeirParams, h: f64) -> [f64; 5] {
    let f = |y: &[f64; 5]| -> [f64; 5] {
        let st = SeirState {
            s: y[0],
            e: y[1],
            i: y[2],
            r: y[3],
            t: 0.0,
        };
        let d = seir_derivative(&st, p);
        [d[0], d[1], d[2], d[3], p.sigma * y[1]]
    };
    let add = |y: &[f64; 5], k: &[f64; 5], s: f64| -> [f64; 5] { std::array::from_fn(|i| y[i] + s * k[i]) };
    let k1 = f(y);
    let k2 = f(&add(y, &k1, h / 2.0));
    let k3 = f(&add(y, &k2, h / 2.0));
    let k4 = f(&add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn integrate(
    initial: &SeirState,
    params_for_day: impl Fn(usize) -> SeirParams,
    horizon: usize,
    dt: f64,
) -> Result<Trajectory> {
    let steps = steps_per_day(dt)?;
    if horizon < 1 {
        return Err(Error::config("horizon must be ≥ 1 day"));
    }
    initial.validate()?;
    let h = 1.0 / steps as f64;
    let mut y = [initial.s, initial.e, initial.i, initial.r, 0.0];
    let mut days = Vec::with_capacity(horizon + 1);
    let mut daily = Vec::with_capacity(horizon + 1);
    days.push(*initial);
    daily.push(0.0);
    for d in 0..horizon {
        let p = params_for_day(d);
        y[4] = 0.0;
        for _ in 0..steps {
            y = rk4_step(&y, &p, h);
        }
        days.push(SeirState {
            s: y[0],
            e: y[1],
            i: y[2],
            r: y[3],
            t: initial.t + (d + 1) as f64,
        });
        daily.push(y[4]);
    }
    Ok(Trajectory {
        days,
        daily_new_cases: daily,
    })
}

/// RK4 integration sampled once per day for `horizon` days.
pub fn simulate_seir(initial: &SeirState, params: &SeirParams, horizon: usize, dt: f64) -> Result<Trajectory> {
    params.validate()?;
    integrate(initial, |_| *params, horizon, dt)
}

/// Expected counts of the daily stochastic network model on a well-mixed
/// population: each day a susceptible is exposed with probability
/// `1 − exp(−β I / N)`, and E → I, I → R happen with probabilities
/// `1 − exp(−σ)`, `1 − exp(−γ)`, all from the state at the start of the day.
///
/// The geometric dwell times make each stage about half a day longer than
/// in the ODE, so its epidemic peaks a few days after [`simulate_seir`]'s.
pub fn simulate_daily_seir(initial: &SeirState, params: &SeirParams, horizon: usize) -> Result<Trajectory> {
    params.validate()?;
    initial.validate()?;
    if horizon < 1 {
        return Err(Error::config("horizon must be ≥ 1 day"));
    }
    let p_onset = 1.0 - (-params.sigma).exp();
    let p_recover = 1.0 - (-params.gamma).exp();
    let mut x = *initial;
    let mut days = vec![x];
    let mut daily = vec![0.0];
    for _ in 0..horizon {
        let exposed = x.s * (1.0 - (-params.beta * x.i / params.population).exp());
        let onset = x.e * p_onset;
        let recovered = x.i * p_recover;
        x = SeirState {
            s: x.s - exposed,
            e: x.e + exposed - onset,
            i: x.i + onset - recovered,
            r: x.r + recovered,
            t: x.t + 1.0,
        };
        days.push(x);
        daily.push(onset);
    }
    Ok(Trajectory {
        days,
        daily_new_cases: daily,
    })
}

/// Like [`simulate_seir`], with piecewise-constant parameters switching at
/// checkpoint dates (day 0 is `start`).
pub fn simulate_extended_seir(
    initial: &SeirState,
    params: &SeirParams,
    checkpoints: &[Checkpoint],
    start: NaiveDate,
    horizon: usize,
    dt: f64,
) -> Result<Trajectory> {
    params.validate()?;
    let mut schedule: Vec<(usize, SeirParams)> = Vec::with_capacity(checkpoints.len());
    let mut current = *params;
    for (k, cp) in checkpoints.iter().enumerate() {
        if k > 0 && cp.date <= checkpoints[k - 1].date {
            return Err(Error::config("checkpoint dates must be strictly increasing"));
        }
        let offset = (cp.date - start).num_days();
        if offset < 0 || offset as usize > horizon {
            return Err(Error::config(format!(
                "checkpoint {} lies outside the simulated range {start} + {horizon} days",
                cp.date
            )));
        }
        current = cp.overrides.apply(&current);
        current.validate()?;
        schedule.push((offset as usize, current));
    }
    integrate(
        initial,
        |day| {
            schedule
                .iter()
                .rev()
                .find(|(offset, _)| *offset <= day)
                .map(|(_, p)| *p)
                .unwrap_or(*params)
        },
        horizon,
        dt,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 3, 2).unwrap()
    }

    #[test]
    fn disease_free_equilibrium() {
        let s = SeirState::seeded(1000.0, 0.0, 0.0);
        assert_eq!(seir_derivative(&s, &SeirParams::default()), [0.0; 4]);
        let traj = simulate_seir(&s, &SeirParams::default(), 30, 0.25).unwrap();
        assert!(traj.days.iter().all(|d| d.s == 1000.0 && d.i == 0.0));
    }

    #[test]
    fn no_transmission() {
        let p = SeirParams {
            beta: 0.0,
            ..SeirParams::default()
        };
        let s = SeirState {
            s: 900.0,
            e: 50.0,
            i: 30.0,
            r: 20.0,
            t: 0.0,
        };
        let d = seir_derivative(&s, &p);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[2], p.sigma * 50.0 - p.gamma * 30.0);
    }

    proptest! {
        #[test]
        fn derivative_conserves(s in 0.0f64..1e6, e in 0.0f64..1e5, i in 0.0f64..1e5, r in 0.0f64..1e5) {
            let st = SeirState { s, e, i, r, t: 0.0 };
            let p = SeirParams { population: s + e + i + r + 1.0, ..SeirParams::default() };
            let d = seir_derivative(&st, &p);
            prop_assert!((d[0] + d[1] + d[2] + d[3]).abs() <= 1e-9 * (s + e + i + r + 1.0));
        }
    }

    #[test]
    fn subcritical_epidemic_dies_out() {
        let p = SeirParams {
            beta: 0.2,
            sigma: 0.2,
            gamma: 0.5,
            population: 1e6,
        };
        let traj = simulate_seir(&SeirState::seeded(1e6, 100.0, 100.0), &p, 400, 0.1).unwrap();
        let i = traj.infectious();
        let peak = i
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (d, &v)| if v > acc.1 { (d, v) } else { acc })
            .0;
        for w in i[peak + 5..].windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(i[400] < 1e-3);
    }

    #[test]
    fn invalid_step_size() {
        let s = SeirState::seeded(100.0, 1.0, 1.0);
        let p = SeirParams::default();
        assert!(simulate_seir(&s, &p, 10, 0.0).is_err());
        assert!(simulate_seir(&s, &p, 10, 0.6).is_err());
        assert!(simulate_seir(&s, &p, 10, 0.3).is_err());
    }

    #[test]
    fn beta_halved_at_day_21() {
        let p = SeirParams::default();
        let init = SeirState::seeded(p.population, 500.0, 200.0);
        let plain = simulate_seir(&init, &p, 60, 0.25).unwrap();
        let cp = Checkpoint {
            date: start() + chrono::Duration::days(21),
            overrides: ParamOverrides {
                beta: Some(p.beta / 2.0),
                ..Default::default()
            },
        };
        let ext = simulate_extended_seir(&init, &p, &[cp], start(), 60, 0.25).unwrap();
        let first_diff = (0..=60).find(|&d| plain.days[d] != ext.days[d]).unwrap();
        assert_eq!(first_diff, 22);
    }

    #[test]
    fn restoring_checkpoints_are_continuous() {
        let p = SeirParams::default();
        let init = SeirState::seeded(p.population, 500.0, 200.0);
        let [d1, d2] = default_checkpoint_dates();
        let cps = [
            Checkpoint {
                date: d1,
                overrides: ParamOverrides {
                    beta: Some(0.1),
                    ..Default::default()
                },
            },
            Checkpoint {
                date: d2,
                overrides: ParamOverrides {
                    beta: Some(p.beta),
                    ..Default::default()
                },
            },
        ];
        let traj = simulate_extended_seir(&init, &p, &cps, start(), 114, 0.5).unwrap();
        // one-day increments never jump by more than the total daily flow
        for w in traj.days.windows(2) {
            let jump = (w[1].s - w[0].s).abs();
            assert!(jump <= p.beta * w[0].i.max(w[1].i) * 1.5 + 1.0);
        }
        assert!(simulate_extended_seir(&init, &p, &cps, start(), 40, 0.5).is_err());
    }
}
