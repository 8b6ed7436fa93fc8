//! True demand environments over a time×price grid.
//!
//! Two integer-valued demand families are supported: Poisson with per-cell
//! intensity, and negative binomial ("failures before the r-th success")
//! with a shared `r` and per-cell success probability. Offering the shut-off
//! price yields zero demand with probability one.
//!
//! Periods and price indices are 0-based throughout the crate; the closed
//! formulas below map index `t` to the 1-based period `t+1` and index `k` to
//! the price value `prices[k]`.

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, Poisson as PoissonDist};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The `K` feasible prices plus a distinguished shut-off action.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    prices: Vec<f64>,
}

impl PriceGrid {
    /// Builds a grid from a strictly increasing list of non-negative prices.
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::invalid("price grid needs at least one price"));
        }
        for (i, p) in prices.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::invalid(format!("price {i} is {p}")));
            }
            if i > 0 && prices[i - 1] >= *p {
                return Err(Error::invalid("prices must be strictly increasing"));
            }
        }
        Ok(PriceGrid { prices })
    }

    /// 1, 2, ..., k.
    pub fn unit_range(k: usize) -> Self {
        PriceGrid {
            prices: (1..=k).map(|p| p as f64).collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    #[inline]
    pub fn price(&self, k: usize) -> f64 {
        self.prices[k]
    }

    #[inline]
    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// The top feasible price `p_K`.
    #[inline]
    pub fn max_price(&self) -> f64 {
        *self.prices.last().unwrap()
    }
}

/// An action is a real price (by grid index) or the shut-off price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Price(usize),
    Shutoff,
}

impl Action {
    pub fn price_index(self) -> Option<usize> {
        match self {
            Action::Price(k) => Some(k),
            Action::Shutoff => None,
        }
    }

    pub fn is_shutoff(self) -> bool {
        matches!(self, Action::Shutoff)
    }
}

/// T×K matrix of mean demands.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanDemandMatrix {
    horizon: usize,
    num_prices: usize,
    values: Vec<f64>,
}

impl MeanDemandMatrix {
    pub fn new(horizon: usize, num_prices: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != horizon * num_prices {
            return Err(Error::invalid(format!(
                "expected {}x{} = {} entries, got {}",
                horizon,
                num_prices,
                horizon * num_prices,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("mean demands must be finite and >= 0"));
        }
        Ok(MeanDemandMatrix {
            horizon,
            num_prices,
            values,
        })
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn num_prices(&self) -> usize {
        self.num_prices
    }

    #[inline]
    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values[t * self.num_prices + k]
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.num_prices..(t + 1) * self.num_prices]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Per-cell parameters for the two demand families.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandParams {
    /// Poisson intensity per (t, k); all entries > 0.
    Poisson { intensity: Vec<f64> },
    /// Negative binomial: shared failure-count `r` > 0 and per-(t, k)
    /// success probability in (0, 1).
    NegBin { r: f64, success: Vec<f64> },
}

/// The ground-truth demand law: family, horizon, grid, and parameter table.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandEnvironment {
    horizon: usize,
    grid: PriceGrid,
    params: DemandParams,
    /// Optional support bound carried for the bounded-demand theory; the
    /// samplers never truncate draws.
    d_bar: Option<u64>,
}

impl DemandEnvironment {
    pub fn poisson(horizon: usize, grid: PriceGrid, intensity: Vec<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        if intensity.len() != horizon * grid.len() {
            return Err(Error::invalid("intensity table dimensions mismatch"));
        }
        if intensity.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(Error::invalid("poisson intensities must be finite and > 0"));
        }
        Ok(DemandEnvironment {
            horizon,
            grid,
            params: DemandParams::Poisson { intensity },
            d_bar: None,
        })
    }

    pub fn negbin(horizon: usize, grid: PriceGrid, r: f64, success: Vec<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid("negbin r must be finite and > 0"));
        }
        if success.len() != horizon * grid.len() {
            return Err(Error::invalid("success table dimensions mismatch"));
        }
        if success.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::invalid("negbin success probabilities must lie in (0,1)"));
        }
        Ok(DemandEnvironment {
            horizon,
            grid,
            params: DemandParams::NegBin { r, success },
            d_bar: None,
        })
    }

    pub fn with_support_cap(mut self, d_bar: u64) -> Self {
        self.d_bar = Some(d_bar);
        self
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    #[inline]
    pub fn num_prices(&self) -> usize {
        self.grid.len()
    }

    pub fn params(&self) -> &DemandParams {
        &self.params
    }

    pub fn support_cap(&self) -> Option<u64> {
        self.d_bar
    }

    pub fn is_negbin(&self) -> bool {
        matches!(self.params, DemandParams::NegBin { .. })
    }

    fn check_cell(&self, t: usize, k: usize) -> Result<()> {
        if t >= self.horizon {
            return Err(Error::invalid(format!(
                "period {t} out of range (horizon {})",
                self.horizon
            )));
        }
        if k >= self.grid.len() {
            return Err(Error::invalid(format!(
                "price index {k} out of range (K = {})",
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// Mean demand λ_{t,k} for each real-price cell (the shut-off column is
    /// identically zero and not represented).
    pub fn mean_demand(&self) -> MeanDemandMatrix {
        let k = self.grid.len();
        let values = match &self.params {
            DemandParams::Poisson { intensity } => intensity.clone(),
            DemandParams::NegBin { r, success } => {
                success.iter().map(|p| r * (1.0 - p) / p).collect()
            }
        };
        MeanDemandMatrix {
            horizon: self.horizon,
            num_prices: k,
            values,
        }
    }

    /// One exact draw from the demand distribution at `(t, action)`.
    /// The shut-off action returns 0 without consuming randomness.
    pub fn sample_demand<R: Rng + ?Sized>(
        &self,
        t: usize,
        action: Action,
        rng: &mut R,
    ) -> Result<u64> {
        let k = match action {
            Action::Shutoff => {
                if t >= self.horizon {
                    return Err(Error::invalid(format!("period {t} out of range")));
                }
                return Ok(0);
            }
            Action::Price(k) => k,
        };
        self.check_cell(t, k)?;
        let idx = t * self.grid.len() + k;
        match &self.params {
            DemandParams::Poisson { intensity } => Ok(sample_poisson(intensity[idx], rng)),
            DemandParams::NegBin { r, success } => {
                // Gamma-Poisson mixture: exact NegBin(r, p) for any real r > 0.
                let p = success[idx];
                let scale = (1.0 - p) / p;
                let lambda = GammaDist::new(*r, scale)
                    .map_err(|e| Error::invalid(format!("gamma mixture: {e}")))?
                    .sample(rng);
                Ok(sample_poisson(lambda, rng))
            }
        }
    }

    /// Distribution of `min(D, cap)`: entries `0..cap` hold `P(D = d)` and
    /// entry `cap` holds the tail `P(D >= cap)`. Sums to 1 by construction.
    pub fn capped_demand_pmf(&self, t: usize, k: usize, cap: u64) -> Result<Vec<f64>> {
        self.check_cell(t, k)?;
        let idx = t * self.grid.len() + k;
        let log_pmf: &dyn Fn(u64) -> f64 = match &self.params {
            DemandParams::Poisson { intensity } => {
                let lambda = intensity[idx];
                &move |d| poisson_log_pmf(lambda, d)
            }
            DemandParams::NegBin { r, success } => {
                let (r, p) = (*r, success[idx]);
                &move |d| negbin_log_pmf(r, p, d)
            }
        };
        let mut out = Vec::with_capacity(cap as usize + 1);
        // Neumaier-compensated running sum of the head probabilities.
        let mut sum = 0.0;
        let mut comp = 0.0;
        for d in 0..cap {
            let p = log_pmf(d).exp();
            out.push(p);
            let t_sum = sum + p;
            comp += if sum.abs() >= p.abs() {
                (sum - t_sum) + p
            } else {
                (p - t_sum) + sum
            };
            sum = t_sum;
        }
        let head = sum + comp;
        out.push((1.0 - head).max(0.0));
        Ok(out)
    }
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let draw: f64 = PoissonDist::new(lambda)
        .expect("lambda validated > 0")
        .sample(rng);
    draw as u64
}

/// log P(D = d) for D ~ Poisson(λ), stable for λ and d up to 1e4 and beyond.
pub fn poisson_log_pmf(lambda: f64, d: u64) -> f64 {
    let df = d as f64;
    if d == 0 {
        return -lambda;
    }
    df * lambda.ln() - lambda - ln_gamma(df + 1.0)
}

/// log P(D = d) for D ~ NegBin(r, p) counting failures before the r-th
/// success: `C(d+r-1, r-1) p^r (1-p)^d`.
pub fn negbin_log_pmf(r: f64, p: f64, d: u64) -> f64 {
    let df = d as f64;
    ln_gamma(df + r) - ln_gamma(r) - ln_gamma(df + 1.0) + r * p.ln() + df * (1.0 - p).ln()
}

/// Lanczos log-gamma (g = 7, 9 terms); |relative error| < 1e-13 on the
/// positive axis, with reflection for z < 0.5.
pub fn ln_gamma(z: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if z < 0.5 {
        // Reflection: Γ(z)Γ(1-z) = π / sin(πz).
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        x += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

// ---------------------------------------------------------------------------
// JSON environment presets
// ---------------------------------------------------------------------------

/// Serializable description of a demand environment.
///
/// `params.kind` selects a closed-form parameter table ("formula-A1",
/// "formula-B", "negbin-PA", "negbin-PB") or an explicit `table`; `family`
/// is "poisson" or "negbin" (the latter requires `r`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnvironmentSpec {
    pub family: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub prices: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub params: ParamsSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParamsSpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<f64>>>,
}

impl EnvironmentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_environment(&self) -> Result<DemandEnvironment> {
        let grid = PriceGrid::new(self.prices.clone())?;
        let horizon = self.horizon;
        let cells = horizon * grid.len();
        let table_from = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            let mut v = Vec::with_capacity(cells);
            for t in 0..horizon {
                for k in 0..grid.len() {
                    // Formulas are stated over 1-based periods and price values.
                    v.push(f((t + 1) as f64, grid.price(k)));
                }
            }
            v
        };
        let explicit = || -> Result<Vec<f64>> {
            let table = self
                .params
                .table
                .as_ref()
                .ok_or_else(|| Error::Config("params.table required for kind=explicit".into()))?;
            if table.len() != horizon {
                return Err(Error::Config(format!(
                    "params.table: expected {horizon} rows, got {}",
                    table.len()
                )));
            }
            let mut v = Vec::with_capacity(cells);
            for (t, row) in table.iter().enumerate() {
                if row.len() != grid.len() {
                    return Err(Error::Config(format!(
                        "params.table[{t}]: expected {} entries, got {}",
                        grid.len(),
                        row.len()
                    )));
                }
                v.extend_from_slice(row);
            }
            Ok(v)
        };
        let tf = horizon as f64;
        let table = match (self.family.as_str(), self.params.kind.as_str()) {
            ("poisson", "formula-A1") => table_from(&|t, p| 50.0 * (-(p + t) / 5.0).exp()),
            ("poisson", "formula-B") => {
                table_from(&|t, p| 50.0 * (-p / (0.5 + 5.0 * t / tf)).exp())
            }
            ("negbin", "negbin-PA") => table_from(&|t, p| 1.0 - (-(t + p) / 10.0).exp()),
            ("negbin", "negbin-PB") => {
                table_from(&|t, p| 1.0 - (-p / (0.5 + 5.0 * t / tf)).exp())
            }
            ("poisson", "explicit") | ("negbin", "explicit") => explicit()?,
            ("poisson", other) | ("negbin", other) => {
                return Err(Error::Config(format!("params.kind: unknown kind {other:?}")))
            }
            (fam, _) => return Err(Error::Config(format!("family: unknown family {fam:?}"))),
        };
        match self.family.as_str() {
            "poisson" => DemandEnvironment::poisson(horizon, grid, table),
            _ => {
                let r = self
                    .r
                    .ok_or_else(|| Error::Config("r required for family=negbin".into()))?;
                DemandEnvironment::negbin(horizon, grid, r, table)
            }
        }
    }
}
