//! Regret aggregation over trial results.
//!
//! The per-episode relative regret after `s` episodes is
//! `ρ_s = 1 − CumRev(s) / (s · Rev*)`; the curve reports its mean and
//! standard error across trials. Absolute regret is the Monte-Carlo mean of
//! `S·Rev* − Σ_s revenue_s`.

use crate::error::{Error, Result};
use crate::sim::TrialResult;

/// Mean/stderr of the relative-regret series across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub rev_star: f64,
    /// mean of ρ_s across trials, indexed by episode (s = index + 1).
    pub mean: Vec<f64>,
    /// sample standard error of ρ_s across trials (0 with one trial).
    pub stderr: Vec<f64>,
}

impl RegretCurve {
    pub fn episodes(&self) -> usize {
        self.mean.len()
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("non-empty curve")
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Relative-regret curve across trials; all trials must share one episode
/// count and `rev_star` must be positive.
pub fn relative_regret_curve(trials: &[TrialResult], rev_star: f64) -> Result<RegretCurve> {
    if !(rev_star > 0.0) {
        return Err(Error::invalid(format!("rev_star must be > 0, got {rev_star}")));
    }
    let Some(first) = trials.first() else {
        return Err(Error::invalid("no trials given"));
    };
    let episodes = first.revenues.len();
    if trials.iter().any(|t| t.revenues.len() != episodes) {
        return Err(Error::invalid("trials disagree on episode count"));
    }
    let mut mean = Vec::with_capacity(episodes);
    let mut stderr = Vec::with_capacity(episodes);
    let mut cums: Vec<f64> = vec![0.0; trials.len()];
    let mut rhos = vec![0.0; trials.len()];
    for s in 0..episodes {
        for (i, trial) in trials.iter().enumerate() {
            cums[i] += trial.revenues[s];
            rhos[i] = 1.0 - cums[i] / ((s + 1) as f64 * rev_star);
        }
        let (m, se) = mean_stderr(&rhos);
        mean.push(m);
        stderr.push(se);
    }
    Ok(RegretCurve {
        rev_star,
        mean,
        stderr,
    })
}

/// Monte-Carlo estimate of the absolute regret with a 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsoluteRegret {
    pub mean: f64,
    pub half_width: f64,
}

pub fn absolute_regret(trials: &[TrialResult], rev_star: f64, episodes: usize) -> AbsoluteRegret {
    let per_trial: Vec<f64> = trials
        .iter()
        .map(|t| episodes as f64 * rev_star - t.revenues.iter().take(episodes).sum::<f64>())
        .collect();
    let (mean, se) = mean_stderr(&per_trial);
    AbsoluteRegret {
        mean,
        half_width: 1.96 * se,
    }
}

/// Pooled mean/stderr of the single-episode relative regret
/// `1 − revenue/Rev*` over every (trial, episode) pair; the natural
/// summary for the oracle policies, whose episodes are i.i.d.
pub fn pooled_relative_regret(trials: &[TrialResult], rev_star: f64) -> (f64, f64) {
    let all: Vec<f64> = trials
        .iter()
        .flat_map(|t| t.revenues.iter().map(|r| 1.0 - r / rev_star))
        .collect();
    mean_stderr(&all)
}
