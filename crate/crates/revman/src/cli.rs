//! Command-line interface.
//!
//! Subcommands: `simulate` (explicit JSON config), `replicate` (named
//! presets), `dp-oracle` (hindsight value), `lp` (one LP instance).
//! Exit codes: 0 success, 1 usage/config error, 2 runtime error.

use std::path::PathBuf;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::demand::MeanDemandMatrix;
use crate::dp::solve_dp;
use crate::error::{Error, Result};
use crate::harness::{expand_preset, fmt_g10, run_experiment, ExperimentConfig, PriorChoice};
use crate::lp::solve_lp;
use crate::{PriceGrid, PricingPlan};

#[derive(Parser, Debug)]
#[command(
    name = "revman",
    version,
    about = "Episodic revenue-management simulator: LP-based posterior-sampling pricing policies against an exact DP oracle"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run an experiment described by a JSON config file.
    Simulate {
        /// Path to the experiment config (see README for the schema).
        #[arg(long)]
        config: PathBuf,
        /// Cap the worker pool (defaults to REVMAN_WORKERS or all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a named experiment preset end to end.
    Replicate {
        /// Preset: A1, A2, B1, B2, NB-A1, NB-A2, NB-B1, NB-B2.
        #[arg(long)]
        preset: String,
        /// Number of independent trials (preset default if omitted).
        #[arg(long)]
        trials: Option<usize>,
        /// Base seed for the trial streams.
        #[arg(long)]
        seed: Option<u64>,
        /// Episodes per trial (preset default if omitted).
        #[arg(long)]
        episodes: Option<usize>,
        /// Prior flavor for the Poisson presets: gamma | gp.
        #[arg(long)]
        prior: Option<String>,
        /// Comma-separated policy list (default: all six).
        #[arg(long)]
        policies: Option<String>,
        /// With the GP prior, run the full 100 trials instead of 20.
        #[arg(long)]
        full: bool,
        /// Output directory (default: out/<preset>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cap the worker pool.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compute the hindsight-optimal expected revenue for a preset.
    #[command(name = "dp-oracle")]
    DpOracle {
        /// Preset name (accepts suffixed spellings like A1-n50).
        #[arg(long)]
        preset: String,
        /// Override the preset's initial inventory.
        #[arg(long)]
        n0: Option<u64>,
        /// Also dump the value table as CSV (rows = remaining periods).
        #[arg(long, value_name = "FILE")]
        dump_v: Option<PathBuf>,
    },
    /// Solve one fluid-LP instance from a JSON file.
    Lp {
        /// Instance file: {"lambda": [[..]], "prices": [..], "start": 0, "inventory": n}.
        #[arg(long)]
        instance: PathBuf,
    },
}

#[derive(Debug, Deserialize)]
struct LpInstance {
    lambda: Vec<Vec<f64>>,
    prices: Vec<f64>,
    #[serde(default)]
    start: usize,
    inventory: f64,
}

fn plan_to_json(plan: &PricingPlan) -> serde_json::Value {
    let rows: Vec<Vec<f64>> = (0..plan.rows()).map(|i| plan.row(i).to_vec()).collect();
    serde_json::json!({
        "objective": plan.objective,
        "dual_mu": plan.dual_mu,
        "x": rows,
    })
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Simulate { config, workers } => {
            let text = std::fs::read_to_string(&config)?;
            let config = ExperimentConfig::from_json(&text)?;
            let output = run_experiment(&config, workers)?;
            println!(
                "wrote {} and {}",
                config.out_dir.join("regret_curves.csv").display(),
                config.out_dir.join("summary.json").display()
            );
            for p in &output.summary.policies {
                println!(
                    "{}: final relative regret {} ± {}",
                    p.policy,
                    fmt_g10(p.final_relative_regret_mean),
                    fmt_g10(p.final_relative_regret_stderr)
                );
            }
            Ok(())
        }
        Cmd::Replicate {
            preset,
            trials,
            seed,
            episodes,
            prior,
            policies,
            full,
            out,
            workers,
        } => {
            let prior_choice = match prior.as_deref() {
                None => PriorChoice::Default,
                Some("gamma") => PriorChoice::Gamma,
                Some("gp") => PriorChoice::Gp,
                Some(other) => {
                    return Err(Error::Config(format!(
                        "prior: expected gamma or gp, got {other:?}"
                    )))
                }
            };
            let mut config = expand_preset(&preset, prior_choice, full)?;
            if let Some(t) = trials {
                config.trials = t;
            }
            if let Some(s) = seed {
                config.base_seed = s;
            }
            if let Some(e) = episodes {
                config.episodes = e;
            }
            if let Some(list) = policies {
                config.policies = list.split(',').map(|s| s.trim().to_string()).collect();
            }
            config.out_dir = out.unwrap_or_else(|| {
                PathBuf::from("out").join(config.preset.as_deref().unwrap_or("experiment"))
            });
            let output = run_experiment(&config, workers)?;
            println!(
                "preset {} | Rev* = {} | {} trials x {} episodes",
                config.preset.as_deref().unwrap_or("?"),
                fmt_g10(output.summary.rev_star),
                config.trials,
                config.episodes
            );
            for p in &output.summary.policies {
                println!(
                    "{}: final relative regret {} ± {}",
                    p.policy,
                    fmt_g10(p.final_relative_regret_mean),
                    fmt_g10(p.final_relative_regret_stderr)
                );
            }
            Ok(())
        }
        Cmd::DpOracle { preset, n0, dump_v } => {
            let config = expand_preset(&preset, PriorChoice::Default, false)?;
            let env = config.environment.to_environment()?;
            let n0 = n0.unwrap_or(config.n0);
            let started = std::time::Instant::now();
            let table = solve_dp(&env, n0)?;
            let runtime_ms = started.elapsed().as_millis() as u64;
            println!(
                "{}",
                serde_json::json!({
                    "rev_star": table.rev_star(),
                    "n0": n0,
                    "runtime_ms": runtime_ms,
                })
            );
            if let Some(path) = dump_v {
                let mut csv = String::new();
                for rem in 0..=table.horizon() {
                    let row: Vec<String> = (0..=table.initial_inventory())
                        .map(|n| fmt_g10(table.value(rem, n)))
                        .collect();
                    csv.push_str(&row.join(","));
                    csv.push('\n');
                }
                std::fs::write(path, csv)?;
            }
            Ok(())
        }
        Cmd::Lp { instance } => {
            let text = std::fs::read_to_string(&instance)?;
            let parsed: LpInstance = serde_json::from_str(&text)?;
            let horizon = parsed.lambda.len();
            let k = parsed.prices.len();
            let mut values = Vec::with_capacity(horizon * k);
            for (i, row) in parsed.lambda.iter().enumerate() {
                if row.len() != k {
                    return Err(Error::Config(format!(
                        "lambda[{i}]: expected {k} entries, got {}",
                        row.len()
                    )));
                }
                values.extend_from_slice(row);
            }
            let lambda = MeanDemandMatrix::new(horizon, k, values)?;
            let grid = PriceGrid::new(parsed.prices)?;
            let plan = solve_lp(&lambda, parsed.start, parsed.inventory, &grid)?;
            println!("{}", plan_to_json(&plan));
            Ok(())
        }
    }
}

/// Parses `argv` and executes; returns the process exit code.
pub fn cli_dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}
