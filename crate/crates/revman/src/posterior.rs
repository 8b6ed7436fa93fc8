//! Bayesian posterior state over the mean-demand matrix.
//!
//! Three prior families are supported:
//!
//! - independent Gamma-Poisson per cell (shape/scale parameterization),
//! - independent Beta-NegBin per cell with known `r`,
//! - a GP prior on `log λ` over the (period, price) grid with a Poisson
//!   likelihood, fitted by Laplace approximation.
//!
//! All three likelihoods depend on the history only through per-cell offer
//! counts `N` and demand sums `S`, so [`SufficientStats`] is an exact
//! summary. Shut-off observations carry no likelihood information (demand
//! is deterministically zero there) and are ignored.

pub mod gp;

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::demand::{Action, MeanDemandMatrix, PriceGrid};
use crate::error::{Error, Result};
use crate::linalg::{CholeskyFactor, DenseMatrix};
use gp::GpFit;

/// Per-cell offer counts and demand sums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SufficientStats {
    horizon: usize,
    num_prices: usize,
    counts: Vec<u64>,
    sums: Vec<u64>,
}

impl SufficientStats {
    pub fn new(horizon: usize, num_prices: usize) -> Self {
        SufficientStats {
            horizon,
            num_prices,
            counts: vec![0; horizon * num_prices],
            sums: vec![0; horizon * num_prices],
        }
    }

    #[inline]
    fn idx(&self, t: usize, k: usize) -> usize {
        t * self.num_prices + k
    }

    pub fn count(&self, t: usize, k: usize) -> u64 {
        self.counts[self.idx(t, k)]
    }

    pub fn sum(&self, t: usize, k: usize) -> u64 {
        self.sums[self.idx(t, k)]
    }

    pub fn total_observations(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn record(&mut self, t: usize, k: usize, demand: u64) {
        let i = self.idx(t, k);
        self.counts[i] += 1;
        self.sums[i] += demand;
    }
}

/// Prior hyperparameters, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum PriorSpec {
    /// Independent Gamma(shape α, scale β) on each Poisson intensity.
    #[serde(rename = "gamma")]
    Gamma { alpha: f64, beta: f64 },
    /// Independent Beta(a, b) on each NegBin success probability; `r` known.
    #[serde(rename = "beta-negbin")]
    BetaNegBin { a: f64, b: f64, r: f64 },
    /// GP prior on log λ with an anisotropic RBF kernel and constant mean.
    #[serde(rename = "gp")]
    Gp {
        sigma_t: f64,
        sigma_p: f64,
        jitter: f64,
        #[serde(default)]
        mean: f64,
    },
}

impl PriorSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match self {
            PriorSpec::Gamma { alpha, beta } => {
                pos(*alpha, "alpha")?;
                pos(*beta, "beta")
            }
            PriorSpec::BetaNegBin { a, b, r } => {
                pos(*a, "a")?;
                pos(*b, "b")?;
                pos(*r, "r")
            }
            PriorSpec::Gp {
                sigma_t,
                sigma_p,
                jitter,
                mean,
            } => {
                pos(*sigma_t, "sigma_t")?;
                pos(*sigma_p, "sigma_p")?;
                pos(*jitter, "jitter")?;
                if mean.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("mean must be finite".into()))
                }
            }
        }
    }
}

/// Closed-form per-cell posterior parameters for the conjugate families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellParams {
    /// Gamma(shape, scale) on the Poisson intensity.
    GammaShapeScale { shape: f64, scale: f64 },
    /// Beta(a, b) on the NegBin success probability.
    BetaAB { a: f64, b: f64 },
}

enum FamilyState {
    Gamma {
        alpha: f64,
        beta: f64,
    },
    BetaNegBin {
        a: f64,
        b: f64,
        r: f64,
    },
    Gp {
        mean: f64,
        kernel: DenseMatrix,
        kernel_chol: CholeskyFactor,
        cache: Option<GpFit>,
    },
}

/// Posterior over the mean-demand matrix for one prior family.
pub struct PosteriorState {
    horizon: usize,
    grid: PriceGrid,
    stats: SufficientStats,
    family: FamilyState,
}

impl Clone for PosteriorState {
    fn clone(&self) -> Self {
        PosteriorState {
            horizon: self.horizon,
            grid: self.grid.clone(),
            stats: self.stats.clone(),
            family: match &self.family {
                FamilyState::Gamma { alpha, beta } => FamilyState::Gamma {
                    alpha: *alpha,
                    beta: *beta,
                },
                FamilyState::BetaNegBin { a, b, r } => FamilyState::BetaNegBin {
                    a: *a,
                    b: *b,
                    r: *r,
                },
                FamilyState::Gp {
                    mean,
                    kernel,
                    kernel_chol,
                    cache,
                } => FamilyState::Gp {
                    mean: *mean,
                    kernel: kernel.clone(),
                    kernel_chol: kernel_chol.clone(),
                    cache: cache.clone(),
                },
            },
        }
    }
}

impl PosteriorState {
    pub fn new(spec: &PriorSpec, horizon: usize, grid: PriceGrid) -> Result<Self> {
        spec.validate()?;
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        let family = match spec {
            PriorSpec::Gamma { alpha, beta } => FamilyState::Gamma {
                alpha: *alpha,
                beta: *beta,
            },
            PriorSpec::BetaNegBin { a, b, r } => FamilyState::BetaNegBin {
                a: *a,
                b: *b,
                r: *r,
            },
            PriorSpec::Gp {
                sigma_t,
                sigma_p,
                jitter,
                mean,
            } => {
                let kernel = kernel_matrix(&grid, horizon, *sigma_t, *sigma_p, *jitter)?;
                let kernel_chol = kernel.cholesky_with_jitter(1e-6, 1e-2)?;
                FamilyState::Gp {
                    mean: *mean,
                    kernel,
                    kernel_chol,
                    cache: None,
                }
            }
        };
        Ok(PosteriorState {
            horizon,
            stats: SufficientStats::new(horizon, grid.len()),
            grid,
            family,
        })
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    pub fn is_gp(&self) -> bool {
        matches!(self.family, FamilyState::Gp { .. })
    }

    /// Records one (price, demand) observation. Shut-off observations are a
    /// no-op; any cached GP fit is invalidated.
    pub fn update(&mut self, t: usize, action: Action, demand: u64) -> Result<()> {
        let k = match action {
            Action::Shutoff => return Ok(()),
            Action::Price(k) => k,
        };
        if t >= self.horizon || k >= self.grid.len() {
            return Err(Error::invalid(format!(
                "observation cell ({t}, {k}) out of range"
            )));
        }
        self.stats.record(t, k, demand);
        if let FamilyState::Gp { cache, .. } = &mut self.family {
            *cache = None;
        }
        Ok(())
    }

    /// Closed-form posterior hyperparameters for cell `(t, k)`; `None` for
    /// the GP family.
    pub fn cell_params(&self, t: usize, k: usize) -> Option<CellParams> {
        let n = self.stats.count(t, k) as f64;
        let s = self.stats.sum(t, k) as f64;
        match &self.family {
            FamilyState::Gamma { alpha, beta } => Some(CellParams::GammaShapeScale {
                shape: alpha + s,
                scale: beta / (1.0 + n * beta),
            }),
            FamilyState::BetaNegBin { a, b, r } => Some(CellParams::BetaAB {
                a: a + r * n,
                b: b + s,
            }),
            FamilyState::Gp { .. } => None,
        }
    }

    /// Ensures the Laplace fit is current and returns it. GP family only.
    pub fn gp_laplace_fit(&mut self) -> Result<&GpFit> {
        let horizon = self.horizon;
        let num_prices = self.grid.len();
        match &mut self.family {
            FamilyState::Gp {
                mean,
                kernel,
                kernel_chol,
                cache,
            } => {
                if cache.is_none() {
                    let n_pts = horizon * num_prices;
                    let mean_vec = vec![*mean; n_pts];
                    let counts: Vec<f64> =
                        self.stats.counts.iter().map(|c| *c as f64).collect();
                    let sums: Vec<f64> = self.stats.sums.iter().map(|s| *s as f64).collect();
                    let fit = gp::fit_laplace(kernel, kernel_chol, &mean_vec, &counts, &sums)?;
                    *cache = Some(fit);
                }
                Ok(cache.as_ref().unwrap())
            }
            _ => Err(Error::invalid("gp_laplace_fit requires the GP family")),
        }
    }

    /// Draws one posterior sample of the mean-demand matrix. Cells are
    /// drawn in row-major order for reproducibility.
    pub fn sample_posterior<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<MeanDemandMatrix> {
        let (horizon, num_prices) = (self.horizon, self.grid.len());
        let cells = horizon * num_prices;
        if self.is_gp() {
            self.gp_laplace_fit()?;
            let FamilyState::Gp { cache, .. } = &self.family else {
                unreachable!()
            };
            let fit = cache.as_ref().unwrap();
            let z: Vec<f64> = (0..cells).map(|_| rng.sample(StandardNormal)).collect();
            let lz = fit.cov_chol.mul_lower(&z);
            let values: Vec<f64> = fit
                .mode
                .iter()
                .zip(&lz)
                .map(|(m, d)| (m + d).clamp(-745.0, 700.0).exp().max(f64::MIN_POSITIVE))
                .collect();
            return MeanDemandMatrix::new(horizon, num_prices, values);
        }
        let negbin_r = match &self.family {
            FamilyState::BetaNegBin { r, .. } => Some(*r),
            _ => None,
        };
        let mut values = Vec::with_capacity(cells);
        for t in 0..horizon {
            for k in 0..num_prices {
                match self.cell_params(t, k) {
                    Some(CellParams::GammaShapeScale { shape, scale }) => {
                        let draw: f64 = GammaDist::new(shape, scale)
                            .map_err(|e| Error::Sampling(format!("gamma({shape},{scale}): {e}")))?
                            .sample(rng);
                        values.push(draw.max(f64::MIN_POSITIVE));
                    }
                    Some(CellParams::BetaAB { a, b }) => {
                        let dist = BetaDist::new(a, b)
                            .map_err(|e| Error::Sampling(format!("beta({a},{b}): {e}")))?;
                        // The NegBin mean r(1-q)/q blows up as q -> 0; redraw
                        // vanishing q with a bounded budget.
                        let mut q = 0.0;
                        let mut ok = false;
                        for _ in 0..100 {
                            q = dist.sample(rng);
                            if q >= 1e-12 {
                                ok = true;
                                break;
                            }
                        }
                        if !ok {
                            return Err(Error::Sampling(format!(
                                "beta({a},{b}) kept drawing q < 1e-12"
                            )));
                        }
                        values.push(negbin_r.unwrap() * (1.0 - q) / q);
                    }
                    None => unreachable!("gp handled above"),
                }
            }
        }
        MeanDemandMatrix::new(horizon, num_prices, values)
    }
}

/// Anisotropic RBF kernel over the (period, price) grid:
/// `K((t,p),(t',p')) = exp(−(t−t')²/σ_t² − (p−p')²/σ_p²)` with `jitter`
/// added to the diagonal. Grid points are ordered row-major by (t, k) with
/// 1-based period values, matching [`MeanDemandMatrix`] layout.
pub fn kernel_matrix(
    grid: &PriceGrid,
    horizon: usize,
    sigma_t: f64,
    sigma_p: f64,
    jitter: f64,
) -> Result<DenseMatrix> {
    if !(sigma_t > 0.0 && sigma_p > 0.0) {
        return Err(Error::invalid("kernel scales must be positive"));
    }
    let k = grid.len();
    let n = horizon * k;
    let point = |i: usize| -> (f64, f64) { ((i / k + 1) as f64, grid.price(i % k)) };
    let mut m = DenseMatrix::from_fn(n, |i, j| {
        let (ti, pi) = point(i);
        let (tj, pj) = point(j);
        let dt = (ti - tj) / sigma_t;
        let dp = (pi - pj) / sigma_p;
        (-dt * dt - dp * dp).exp()
    });
    m.add_to_diagonal(jitter);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn gamma_state(horizon: usize, k: usize) -> PosteriorState {
        PosteriorState::new(
            &PriorSpec::Gamma {
                alpha: 10.0,
                beta: 1.0,
            },
            horizon,
            PriceGrid::unit_range(k),
        )
        .unwrap()
    }

    #[test]
    fn gamma_conjugate_update() {
        // Two observations (4 and 7) at one cell: Gamma(10+11, 1/(1+2)).
        let mut st = gamma_state(2, 2);
        st.update(0, Action::Price(1), 4).unwrap();
        st.update(0, Action::Price(1), 7).unwrap();
        match st.cell_params(0, 1).unwrap() {
            CellParams::GammaShapeScale { shape, scale } => {
                assert_eq!(shape, 21.0);
                assert!((scale - 1.0 / 3.0).abs() < 1e-15);
            }
            _ => panic!("wrong family"),
        }
        // Untouched cell keeps the prior.
        match st.cell_params(1, 0).unwrap() {
            CellParams::GammaShapeScale { shape, scale } => {
                assert_eq!((shape, scale), (10.0, 1.0));
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn beta_negbin_conjugate_update() {
        let mut st = PosteriorState::new(
            &PriorSpec::BetaNegBin {
                a: 1.0,
                b: 1.0,
                r: 10.0,
            },
            1,
            PriceGrid::unit_range(1),
        )
        .unwrap();
        st.update(0, Action::Price(0), 5).unwrap();
        match st.cell_params(0, 0).unwrap() {
            CellParams::BetaAB { a, b } => assert_eq!((a, b), (11.0, 6.0)),
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn shutoff_update_is_noop() {
        let mut st = gamma_state(2, 2);
        st.update(0, Action::Shutoff, 99).unwrap();
        assert_eq!(st.stats().total_observations(), 0);
    }

    #[test]
    fn out_of_range_update_errors() {
        let mut st = gamma_state(2, 2);
        assert!(st.update(2, Action::Price(0), 1).is_err());
        assert!(st.update(0, Action::Price(2), 1).is_err());
    }

    #[test]
    fn gamma_prior_mean_recovered() {
        // Zero data, Gamma(10, 1): prior mean 10 per cell.
        let mut st = gamma_state(1, 1);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += st.sample_posterior(&mut rng).unwrap().get(0, 0);
        }
        let mean = sum / n as f64;
        // Var of Gamma(10,1) is 10; 3 sigma of the MC mean.
        let sigma = (10.0 / n as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn kernel_matrix_values() {
        let grid = PriceGrid::unit_range(1);
        let m = kernel_matrix(&grid, 4, 3.0, 2.5, 1e-6).unwrap();
        // Diagonal = 1 + jitter.
        assert!((m.get(0, 0) - (1.0 + 1e-6)).abs() < 1e-15);
        // (t=1, p=1) vs (t=4, p=1): exp(-9/9) = e^{-1}.
        assert!((m.get(0, 3) - (-1.0f64).exp()).abs() < 1e-12);
        // Symmetry is exact (formula is symmetric in its arguments).
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert!(m.cholesky().is_ok());
    }

    #[test]
    fn gp_no_data_prior_recovery() {
        let mut st = PosteriorState::new(
            &PriorSpec::Gp {
                sigma_t: 3.0,
                sigma_p: 2.5,
                jitter: 1e-6,
                mean: 0.0,
            },
            3,
            PriceGrid::unit_range(3),
        )
        .unwrap();
        let fit = st.gp_laplace_fit().unwrap();
        assert!(fit.mode.iter().all(|m| m.abs() < 1e-12));
        // Marginal variance of g at each grid point = kernel diagonal = 1.
        let n = 9;
        for i in 0..n {
            let mut var = 0.0;
            for j in 0..=i {
                var += fit.cov_chol.lower(i, j).powi(2);
            }
            assert!((var - 1.0).abs() < 1e-5, "var[{i}] = {var}");
        }
    }

    #[test]
    fn gp_cache_invalidated_on_update() {
        let mut st = PosteriorState::new(
            &PriorSpec::Gp {
                sigma_t: 3.0,
                sigma_p: 2.5,
                jitter: 1e-6,
                mean: 0.0,
            },
            2,
            PriceGrid::unit_range(2),
        )
        .unwrap();
        let mode0 = st.gp_laplace_fit().unwrap().mode.clone();
        st.update(0, Action::Price(0), 8).unwrap();
        let mode1 = st.gp_laplace_fit().unwrap().mode.clone();
        assert!(mode0
            .iter()
            .zip(&mode1)
            .any(|(a, b)| (a - b).abs() > 1e-6));
    }

    #[test]
    fn update_order_insensitive() {
        let obs = [(0usize, 1usize, 4u64), (1, 0, 2), (0, 1, 9), (1, 1, 0)];
        let mut fwd = gamma_state(2, 2);
        let mut rev = gamma_state(2, 2);
        for &(t, k, d) in &obs {
            fwd.update(t, Action::Price(k), d).unwrap();
        }
        for &(t, k, d) in obs.iter().rev() {
            rev.update(t, Action::Price(k), d).unwrap();
        }
        assert_eq!(fwd.stats(), rev.stats());
    }

    #[test]
    fn prior_spec_json_round_trip() {
        let spec = PriorSpec::from_json(r#"{"family":"gp","sigma_t":3.0,"sigma_p":2.5,"jitter":1e-6,"mean":0}"#)
            .unwrap();
        assert_eq!(
            spec,
            PriorSpec::Gp {
                sigma_t: 3.0,
                sigma_p: 2.5,
                jitter: 1e-6,
                mean: 0.0
            }
        );
        assert!(PriorSpec::from_json(r#"{"family":"gamma","alpha":10,"beta":1}"#).is_ok());
        assert!(
            PriorSpec::from_json(r#"{"family":"beta-negbin","a":1,"b":1,"r":10}"#).is_ok()
        );
    }
}
