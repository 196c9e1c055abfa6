use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use epifuse::baselines::{
    simulate_extended_seir, simulate_network_seir, simulate_seir, Checkpoint, ContactNetwork, SeirState,
};
use serde_json::json;

use super::{load_dataset, usage};
use crate::config::RunConfig;
use crate::error::{file_error, Context, Result};
use crate::manifest::Manifest;
use crate::{BaselineArgs, VariantArg};

fn checkpoints(config: &RunConfig, args: &BaselineArgs, start: NaiveDate, days: usize) -> Result<Vec<Checkpoint>> {
    let configured = &config.synth.checkpoints;
    let Some(dates) = &args.checkpoints else {
        return Ok(configured
            .iter()
            .filter(|c| (c.date - start).num_days() < days as i64)
            .copied()
            .collect());
    };
    if dates.len() > configured.len() {
        return Err(usage(format!(
            "{} checkpoint dates given but only {} checkpoints are configured",
            dates.len(),
            configured.len()
        )));
    }
    dates
        .iter()
        .zip(configured)
        .map(|(text, c)| {
            let date =
                NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|e| usage(format!("checkpoint '{text}': {e}")))?;
            Ok(Checkpoint { date, ..*c })
        })
        .collect()
}

pub fn baseline(config: &mut RunConfig, args: &BaselineArgs, out: &Path) -> Result<()> {
    if let Some(beta) = args.beta {
        config.synth.seir.beta = beta;
    }
    let ds = load_dataset(&args.data, config)?;
    let dates = ds.dates();
    let (start, days) = (dates[0], dates.len());
    let synth = &config.synth;
    let params = synth.seir;
    let initial = SeirState::seeded(params.population, synth.initial_exposed, synth.initial_infectious);
    let name = format!("{:?}", args.variant).to_lowercase();

    // (trajectory CSV, daily new cases in population units)
    let (table, new_cases) = match args.variant {
        VariantArg::Seir | VariantArg::Extended => {
            let traj = if args.variant == VariantArg::Seir {
                simulate_seir(&initial, &params, days, synth.dt).ctx("baselines", "simulate_seir")?
            } else {
                let cps = checkpoints(config, args, start, days)?;
                simulate_extended_seir(&initial, &params, &cps, start, days, synth.dt)
                    .ctx("baselines", "simulate_extended_seir")?
            };
            let path = out.join(format!("{name}.csv"));
            traj.write_csv(&path).ctx("baselines", "write_trajectory")?;
            (path, traj.daily_new_cases)
        }
        VariantArg::Network => {
            let b = &config.baseline;
            if b.initial_infected == 0 || b.initial_infected > b.network_nodes {
                return Err(usage("initial_infected must lie in 1..=network_nodes"));
            }
            let net = ContactNetwork::configuration_poisson(b.network_nodes, b.mean_degree, config.seed)
                .ctx("baselines", "contact_network")?;
            let seeds: Vec<usize> = (0..b.initial_infected).collect();
            let run = simulate_network_seir(&net, &params, &seeds, days, config.seed)
                .ctx("baselines", "simulate_network_seir")?;
            let mut text = String::from("day,S,E,I,R,daily_new_cases\n");
            for (d, (c, n)) in run.counts.iter().zip(&run.daily_new_cases).enumerate() {
                let _ = writeln!(text, "{d},{},{},{},{},{n}", c[0], c[1], c[2], c[3]);
            }
            let path = out.join(format!("{name}.csv"));
            std::fs::write(&path, text).map_err(|e| file_error(&path, e))?;
            let scale = params.population / b.network_nodes as f64;
            (path, run.daily_new_cases.iter().map(|&n| n as f64 * scale).collect())
        }
    };

    // new cases of day k of the dataset are those accrued over step k + 1
    let cases_name = format!("{name}_cases.csv");
    let mut text = String::from("date,reported_cases\n");
    for (k, date) in dates.iter().enumerate() {
        let _ = writeln!(text, "{date},{:.6}", synth.ascertainment * new_cases[k + 1]);
    }
    let cases_path = out.join(&cases_name);
    std::fs::write(&cases_path, text).map_err(|e| file_error(&cases_path, e))?;
    println!("{name} baseline over {days} days from {start}: {}", table.display());

    let mut manifest = Manifest::new(
        "baseline",
        config,
        json!({ "variant": name, "beta": args.beta, "checkpoints": args.checkpoints }),
    );
    manifest.input_dir("data", &args.data)?;
    manifest.output(out, &format!("{name}.csv"))?;
    manifest.output(out, &cases_name)?;
    manifest.write(out)
}
