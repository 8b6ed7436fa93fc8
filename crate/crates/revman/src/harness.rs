//! Experiment harness: named experiment presets, deterministic parallel trial
//! execution, and CSV/JSON emission.
//!
//! Output layout: `regret_curves.csv` with one row per (policy, trial,
//! episode) and `summary.json` with per-policy regret summaries. All
//! randomness derives from `(base_seed, trial_index)`, results are merged
//! by index, and files are assembled in memory before a single write, so
//! any worker count produces identical bytes.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{DemandEnvironment, EnvironmentSpec, ParamsSpec};
use crate::dp::solve_dp;
use crate::error::{Error, Result};
use crate::policies::PolicyKind;
use crate::posterior::PriorSpec;
use crate::regret::{pooled_relative_regret, relative_regret_curve};
use crate::sim::{run_trial, trial_seed, TrialResult};

/// Prior flavor for the Poisson presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorChoice {
    /// Preset default (independent gamma for A/B, beta for NB).
    Default,
    /// Independent Gamma(10, 1).
    Gamma,
    /// GP(σ_t = 3, σ_p = 2.5, jitter 1e-6, zero mean).
    Gp,
}

/// A full experiment description, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub environment: EnvironmentSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    /// Policy names in CLI form (e.g. "ts-episodic").
    pub policies: Vec<String>,
    pub n0: u64,
    pub episodes: usize,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn parsed_policies(&self) -> Result<Vec<PolicyKind>> {
        let mut kinds = Vec::with_capacity(self.policies.len());
        for (i, name) in self.policies.iter().enumerate() {
            kinds.push(
                name.parse::<PolicyKind>()
                    .map_err(|_| Error::Config(format!("policies[{i}]: unknown policy {name:?}")))?,
            );
        }
        Ok(kinds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::Config("policies: need at least one".into()));
        }
        let kinds = self.parsed_policies()?;
        if self.trials == 0 {
            return Err(Error::Config("trials: must be >= 1".into()));
        }
        if self.episodes == 0 {
            return Err(Error::Config("episodes: must be >= 1".into()));
        }
        if kinds.iter().any(|k| k.is_learning()) && self.prior.is_none() {
            return Err(Error::Config(
                "prior: required when any policy learns".into(),
            ));
        }
        self.environment
            .to_environment()
            .map_err(|e| Error::Config(format!("environment: {e}")))?;
        Ok(())
    }
}

fn preset_environment(kind: &str) -> EnvironmentSpec {
    let (family, r) = if kind.starts_with("negbin") {
        ("negbin", Some(10.0))
    } else {
        ("poisson", None)
    };
    EnvironmentSpec {
        family: family.into(),
        horizon: 10,
        prices: (1..=9).map(|p| p as f64).collect(),
        r,
        params: ParamsSpec {
            kind: kind.into(),
            table: None,
        },
    }
}

fn gamma_prior() -> PriorSpec {
    PriorSpec::Gamma {
        alpha: 10.0,
        beta: 1.0,
    }
}

fn gp_prior() -> PriorSpec {
    PriorSpec::Gp {
        sigma_t: 3.0,
        sigma_p: 2.5,
        jitter: 1e-6,
        mean: 0.0,
    }
}

fn beta_negbin_prior() -> PriorSpec {
    PriorSpec::BetaNegBin {
        a: 1.0,
        b: 1.0,
        r: 10.0,
    }
}

/// Canonical preset name for accepted spellings (`A1`, `A-n50`, ...).
pub fn normalize_preset(name: &str) -> Result<&'static str> {
    Ok(match name {
        "A1" | "A-n50" | "A1-n50" => "A1",
        "A2" | "A-n1000" | "A1-n1000" => "A2",
        "B1" | "B-n50" | "B1-n50" => "B1",
        "B2" | "B-n1000" | "B1-n1000" => "B2",
        "NB-A1" | "NB-A-n30" => "NB-A1",
        "NB-A2" | "NB-A-n1000" => "NB-A2",
        "NB-B1" | "NB-B-n30" => "NB-B1",
        "NB-B2" | "NB-B-n1000" => "NB-B2",
        other => {
            return Err(Error::Config(format!(
                "preset: unknown preset {other:?} (expected A1/A2/B1/B2/NB-A1/NB-A2/NB-B1/NB-B2)"
            )))
        }
    })
}

/// Expands a named preset into a full config.
///
/// Poisson presets default to the independent gamma prior (S = 5000 for A,
/// S = 2000 for B, 100 trials); with the GP prior S = 200 and 20 trials in
/// fast mode (`full` restores the 100 trials). NB presets use Beta(1,1)
/// with r = 10, S = 5000, 100 trials.
pub fn expand_preset(name: &str, prior: PriorChoice, full: bool) -> Result<ExperimentConfig> {
    let canonical = normalize_preset(name)?;
    let (env_kind, n0) = match canonical {
        "A1" => ("formula-A1", 50),
        "A2" => ("formula-A1", 1000),
        "B1" => ("formula-B", 50),
        "B2" => ("formula-B", 1000),
        "NB-A1" => ("negbin-PA", 30),
        "NB-A2" => ("negbin-PA", 1000),
        "NB-B1" => ("negbin-PB", 30),
        "NB-B2" => ("negbin-PB", 1000),
        _ => unreachable!(),
    };
    let negbin = env_kind.starts_with("negbin");
    let (prior_spec, episodes, trials) = if negbin {
        if prior == PriorChoice::Gp {
            return Err(Error::Config(
                "prior: gp prior is not defined for the negative-binomial presets".into(),
            ));
        }
        (beta_negbin_prior(), 5000, 100)
    } else {
        match prior {
            PriorChoice::Gp => (gp_prior(), 200, if full { 100 } else { 20 }),
            PriorChoice::Gamma | PriorChoice::Default => (
                gamma_prior(),
                if env_kind == "formula-B" { 2000 } else { 5000 },
                100,
            ),
        }
    };
    Ok(ExperimentConfig {
        preset: Some(canonical.to_string()),
        environment: preset_environment(env_kind),
        prior: Some(prior_spec),
        policies: PolicyKind::ALL.iter().map(|k| k.name().to_string()).collect(),
        n0,
        episodes,
        trials,
        base_seed: 20240501,
        out_dir: default_out_dir(),
    })
}

/// Per-policy regret summary emitted to `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    /// Mean/stderr across trials of ρ_S (the final-episode relative regret).
    pub final_relative_regret_mean: f64,
    pub final_relative_regret_stderr: f64,
    /// Pooled single-episode relative regret over all (trial, episode).
    pub episode_relative_regret_mean: f64,
    pub episode_relative_regret_stderr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub n0: u64,
    pub episodes: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub rev_star: f64,
    pub policies: Vec<PolicySummary>,
}

/// Everything an experiment produced, before or after hitting disk.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    pub csv: String,
    pub trials: Vec<(PolicyKind, Vec<TrialResult>)>,
}

/// Formats with up to 10 significant digits, trimming trailing zeros
/// (printf `%.10g` behavior, fixed notation for moderate exponents).
pub fn fmt_g10(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        let trimmed = fixed.trim_end_matches('0').trim_end_matches('.');
        if trimmed == "-0" {
            "0".to_string()
        } else {
            trimmed.to_string()
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

/// Runs every (policy, trial) job. `workers` caps the rayon pool
/// (`None` reads `REVMAN_WORKERS`, else the rayon default); the output is
/// identical for any worker count.
pub fn run_experiment_jobs(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let kinds = config.parsed_policies()?;
    let env: DemandEnvironment = config.environment.to_environment()?;
    let rev_star = solve_dp(&env, config.n0)?.rev_star();

    let jobs: Vec<(usize, usize)> = (0..kinds.len())
        .flat_map(|p| (0..config.trials).map(move |t| (p, t)))
        .collect();
    let run_all = || -> Result<Vec<TrialResult>> {
        jobs.par_iter()
            .map(|&(p, t)| {
                run_trial(
                    &env,
                    kinds[p],
                    config.prior.as_ref(),
                    config.n0,
                    config.episodes,
                    trial_seed(config.base_seed, t as u64),
                )
            })
            .collect()
    };
    let workers = workers.or_else(|| {
        std::env::var("REVMAN_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let flat: Vec<TrialResult> = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("workers: {e}")))?
            .install(run_all),
        None => run_all(),
    }?;

    let mut per_policy: Vec<(PolicyKind, Vec<TrialResult>)> = Vec::with_capacity(kinds.len());
    for (p, kind) in kinds.iter().enumerate() {
        let slice = flat[p * config.trials..(p + 1) * config.trials].to_vec();
        per_policy.push((*kind, slice));
    }

    // CSV: policy-major, then trial, then episode (1-based episodes).
    let mut csv = String::from("trial,episode,policy,revenue,cum_revenue,relative_regret\n");
    for (kind, trials) in &per_policy {
        for (trial_idx, trial) in trials.iter().enumerate() {
            let mut cum = 0.0;
            for (s, rev) in trial.revenues.iter().enumerate() {
                cum += rev;
                let rho = 1.0 - cum / ((s + 1) as f64 * rev_star);
                csv.push_str(&format!(
                    "{trial_idx},{},{kind},{},{},{}\n",
                    s + 1,
                    fmt_g10(*rev),
                    fmt_g10(cum),
                    fmt_g10(rho)
                ));
            }
        }
    }

    let mut policies = Vec::with_capacity(per_policy.len());
    for (kind, trials) in &per_policy {
        let curve = relative_regret_curve(trials, rev_star)?;
        let finals: Vec<f64> = trials
            .iter()
            .map(|t| {
                1.0 - t.revenues.iter().sum::<f64>() / (config.episodes as f64 * rev_star)
            })
            .collect();
        let n = finals.len() as f64;
        let mean = finals.iter().sum::<f64>() / n;
        let stderr = if finals.len() > 1 {
            (finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        debug_assert!((curve.final_mean() - mean).abs() < 1e-9);
        let (pool_mean, pool_se) = pooled_relative_regret(trials, rev_star);
        policies.push(PolicySummary {
            policy: kind.name().to_string(),
            final_relative_regret_mean: mean,
            final_relative_regret_stderr: stderr,
            episode_relative_regret_mean: pool_mean,
            episode_relative_regret_stderr: pool_se,
        });
    }

    Ok(ExperimentOutput {
        summary: ExperimentSummary {
            preset: config.preset.clone(),
            n0: config.n0,
            episodes: config.episodes,
            trials: config.trials,
            base_seed: config.base_seed,
            rev_star,
            policies,
        },
        csv,
        trials: per_policy,
    })
}

/// Runs the experiment and writes `regret_curves.csv` and `summary.json`
/// into the configured output directory.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutput> {
    let output = run_experiment_jobs(config, workers)?;
    write_outputs(&output, &config.out_dir)?;
    Ok(output)
}

pub fn write_outputs(output: &ExperimentOutput, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("regret_curves.csv"), output.csv.as_bytes())?;
    let mut json = serde_json::to_string_pretty(&output.summary)?;
    json.push('\n');
    std::fs::write(out_dir.join("summary.json"), json.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_normalize() {
        assert_eq!(normalize_preset("A1").unwrap(), "A1");
        assert_eq!(normalize_preset("A1-n50").unwrap(), "A1");
        assert_eq!(normalize_preset("A-n1000").unwrap(), "A2");
        assert_eq!(normalize_preset("NB-B-n30").unwrap(), "NB-B1");
        assert!(normalize_preset("C9").is_err());
    }

    #[test]
    fn preset_expansion_settings() {
        let a1 = expand_preset("A1", PriorChoice::Default, false).unwrap();
        assert_eq!(a1.n0, 50);
        assert_eq!(a1.episodes, 5000);
        assert_eq!(a1.trials, 100);
        assert_eq!(a1.environment.params.kind, "formula-A1");
        assert!(matches!(a1.prior, Some(PriorSpec::Gamma { .. })));

        let a1_gp = expand_preset("A1", PriorChoice::Gp, false).unwrap();
        assert_eq!(a1_gp.episodes, 200);
        assert_eq!(a1_gp.trials, 20);
        let a1_gp_full = expand_preset("A1", PriorChoice::Gp, true).unwrap();
        assert_eq!(a1_gp_full.trials, 100);

        let b2 = expand_preset("B2", PriorChoice::Default, false).unwrap();
        assert_eq!((b2.n0, b2.episodes), (1000, 2000));

        let nb = expand_preset("NB-A1", PriorChoice::Default, false).unwrap();
        assert_eq!(nb.n0, 30);
        assert!(matches!(nb.prior, Some(PriorSpec::BetaNegBin { .. })));
        assert!(expand_preset("NB-A1", PriorChoice::Gp, false).is_err());
    }

    #[test]
    fn preset_expansion_is_pure() {
        let a = expand_preset("B1", PriorChoice::Gamma, false).unwrap();
        let b = expand_preset("B1", PriorChoice::Gamma, false).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn fmt_g10_cases() {
        assert_eq!(fmt_g10(0.0), "0");
        assert_eq!(fmt_g10(1.0), "1");
        assert_eq!(fmt_g10(-321.5), "-321.5");
        assert_eq!(fmt_g10(0.1), "0.1");
        assert_eq!(fmt_g10(123.456789012), "123.456789");
        assert_eq!(fmt_g10(123.456789094), "123.4567891");
        assert_eq!(fmt_g10(1.23456789012e-7), "1.23456789e-7");
        assert_eq!(fmt_g10(9.999999999e9), "9999999999");
        assert_eq!(fmt_g10(1.5e12), "1.5e12");
    }

    #[test]
    fn config_validation_field_paths() {
        let mut config = expand_preset("A1", PriorChoice::Default, false).unwrap();
        config.policies[2] = "ts-nope".into();
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("policies[2]"), "{err}");
        config.policies = vec![];
        assert!(config.validate().is_err());
    }

    #[test]
    fn tiny_experiment_csv_shape() {
        let mut config = expand_preset("A1", PriorChoice::Default, false).unwrap();
        config.policies = vec!["ts-episodic-star".into(), "ts-dynamic-star".into()];
        config.trials = 3;
        config.episodes = 4;
        config.n0 = 5;
        let out = run_experiment_jobs(&config, Some(2)).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], "trial,episode,policy,revenue,cum_revenue,relative_regret");
        // header + trials × episodes × policies
        assert_eq!(lines.len(), 1 + 3 * 4 * 2);
        assert!(lines[1].starts_with("0,1,ts-episodic-star,"));
        assert!(!out.csv.contains('\r'));
        assert_eq!(out.summary.policies.len(), 2);
    }

    #[test]
    fn config_json_round_trip() {
        let config = expand_preset("NB-B2", PriorChoice::Default, false).unwrap();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(config, back);
    }
}
