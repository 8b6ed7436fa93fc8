//! Fluid-relaxation LP over price-mixing probabilities.
//!
//! The program for periods `t..T` with budget `n` is
//!
//! ```text
//! max  Σ_τ Σ_k x_{τ,k} λ_{τ,k} p_k
//! s.t. Σ_τ Σ_k x_{τ,k} λ_{τ,k} ≤ n,      (inventory)
//!      Σ_k x_{τ,k} ≤ 1  for each row τ,   (price mixing)
//!      0 ≤ x ≤ 1.
//! ```
//!
//! With one coupling constraint plus per-row simplex caps, the optimum is
//! found by bisection on the inventory shadow price μ: each row puts full
//! mass on `argmax_k λ_{τ,k}(p_k − μ)` while that value is positive, total
//! consumption is non-increasing in μ, and the crossing row is mixed
//! fractionally so consumption meets `n` exactly. Ties inside a row break
//! toward the lowest price index; rows switching at the same μ are resolved
//! in increasing τ order.
//!
//! [`solve_lp_reference`] is an independent dense-simplex oracle over the
//! same constraint set, used by the test suite to certify the structured
//! solver.

use crate::demand::{MeanDemandMatrix, PriceGrid};
use crate::error::{Error, Result};

/// Tolerances pinned for feasibility and certificate checks.
pub const ROW_SUM_TOL: f64 = 1e-9;
pub const OBJECTIVE_TOL: f64 = 1e-6;

/// Solution of the fluid LP from period `start` (0-based) to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingPlan {
    /// First period covered by the plan (0-based).
    pub start: usize,
    /// Number of feasible prices K.
    pub num_prices: usize,
    /// Row-major (T − start) × K matrix of price-selection probabilities.
    pub x: Vec<f64>,
    /// Optimal objective value.
    pub objective: f64,
    /// Shadow price of the inventory constraint.
    pub dual_mu: f64,
}

impl PricingPlan {
    pub fn rows(&self) -> usize {
        if self.num_prices == 0 {
            0
        } else {
            self.x.len() / self.num_prices
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.num_prices..(i + 1) * self.num_prices]
    }

    /// Residual shut-off probability of row `i`.
    pub fn shutoff_mass(&self, i: usize) -> f64 {
        (1.0 - self.row(i).iter().sum::<f64>()).max(0.0)
    }
}

/// Row-level solution at a fixed shadow price: the chosen column (if the
/// best reduced value is strictly positive) and its consumption.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RowChoice {
    /// Column with the best reduced value, when positive.
    on: Option<usize>,
    /// λ of the chosen column (0 when off).
    consumption: f64,
}

fn row_choice(lambda_row: &[f64], prices: &[f64], mu: f64) -> RowChoice {
    let mut best_k = None;
    let mut best_v = 0.0;
    for (k, (&l, &p)) in lambda_row.iter().zip(prices).enumerate() {
        let v = l * (p - mu);
        if v > best_v {
            best_v = v;
            best_k = Some(k);
        }
    }
    match best_k {
        Some(k) => RowChoice {
            on: Some(k),
            consumption: lambda_row[k],
        },
        None => RowChoice {
            on: None,
            consumption: 0.0,
        },
    }
}

fn total_consumption(lambda: &[&[f64]], prices: &[f64], mu: f64) -> f64 {
    lambda
        .iter()
        .map(|row| row_choice(row, prices, mu).consumption)
        .sum()
}

/// Solves LP(λ, start, n) for the rows `start..T` of `lambda`.
pub fn solve_lp(
    lambda: &MeanDemandMatrix,
    start: usize,
    inventory: f64,
    prices: &PriceGrid,
) -> Result<PricingPlan> {
    if !(inventory >= 0.0) {
        return Err(Error::invalid(format!(
            "inventory must be >= 0, got {inventory}"
        )));
    }
    if lambda.num_prices() != prices.len() {
        return Err(Error::invalid("lambda/price dimensions mismatch"));
    }
    let horizon = lambda.horizon();
    let k = prices.len();
    if start >= horizon {
        // Empty horizon: zero-row plan.
        return Ok(PricingPlan {
            start,
            num_prices: k,
            x: Vec::new(),
            objective: 0.0,
            dual_mu: 0.0,
        });
    }
    let rows: Vec<&[f64]> = (start..horizon).map(|t| lambda.row(t)).collect();
    let pv = prices.prices();
    let nrows = rows.len();

    let finish = |x: Vec<f64>, dual_mu: f64| -> PricingPlan {
        let mut objective = 0.0;
        for (i, row) in rows.iter().enumerate() {
            for kk in 0..k {
                objective += x[i * k + kk] * row[kk] * pv[kk];
            }
        }
        let x = x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        PricingPlan {
            start,
            num_prices: k,
            x,
            objective,
            dual_mu,
        }
    };

    if inventory == 0.0 {
        // Forced shut-off; μ = p_K certifies every row as unprofitable.
        return Ok(finish(vec![0.0; nrows * k], prices.max_price()));
    }

    // Slack case: μ = 0 already satisfies the budget.
    let c0 = total_consumption(&rows, pv, 0.0);
    if c0 <= inventory {
        let mut x = vec![0.0; nrows * k];
        for (i, row) in rows.iter().enumerate() {
            if let Some(kk) = row_choice(row, pv, 0.0).on {
                x[i * k + kk] = 1.0;
            }
        }
        return Ok(finish(x, 0.0));
    }

    // Bisect the shadow price. Consumption is non-increasing in μ and hits
    // zero at μ = p_K, so the bracket is valid.
    let mut lo = 0.0;
    let mut hi = prices.max_price();
    for _ in 0..200 {
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if total_consumption(&rows, pv, mid) > inventory {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let choice_lo: Vec<RowChoice> = rows.iter().map(|r| row_choice(r, pv, lo)).collect();
    let choice_hi: Vec<RowChoice> = rows.iter().map(|r| row_choice(r, pv, hi)).collect();
    let c_hi: f64 = choice_hi.iter().map(|c| c.consumption).sum();

    // Recover the exact breakpoint from the first switching row: either the
    // crossing of two columns' reduced values, or the price at which a
    // column's value reaches zero.
    let mut dual_mu = 0.5 * (lo + hi);
    for (i, (cl, ch)) in choice_lo.iter().zip(&choice_hi).enumerate() {
        if cl.on == ch.on {
            continue;
        }
        let Some(k1) = cl.on else { continue };
        let exact = match ch.on {
            Some(k2) => {
                // Reduced values tie at the crossing: λ1(p1 − μ) = λ2(p2 − μ).
                let l1 = rows[i][k1];
                let l2 = rows[i][k2];
                if l1 == l2 {
                    dual_mu
                } else {
                    (l1 * pv[k1] - l2 * pv[k2]) / (l1 - l2)
                }
            }
            None => pv[k1],
        };
        if exact.is_finite() {
            dual_mu = exact.clamp(0.0, prices.max_price());
        }
        break;
    }

    // Start from the μ⁺ solution and walk rows toward the μ⁻ solution in
    // increasing τ order until the budget is met exactly.
    let mut x = vec![0.0; nrows * k];
    for (i, ch) in choice_hi.iter().enumerate() {
        if let Some(kk) = ch.on {
            x[i * k + kk] = 1.0;
        }
    }
    let mut deficit = inventory - c_hi;
    for i in 0..nrows {
        if deficit <= 0.0 {
            break;
        }
        let (cl, ch) = (choice_lo[i], choice_hi[i]);
        if cl.on == ch.on {
            continue;
        }
        let delta = cl.consumption - ch.consumption;
        if delta <= 0.0 {
            // Equal-consumption switch: adopt the lower-μ action outright.
            if let Some(kk) = ch.on {
                x[i * k + kk] = 0.0;
            }
            if let Some(kk) = cl.on {
                x[i * k + kk] = 1.0;
            }
            continue;
        }
        if deficit >= delta {
            if let Some(kk) = ch.on {
                x[i * k + kk] = 0.0;
            }
            if let Some(kk) = cl.on {
                x[i * k + kk] = 1.0;
            }
            deficit -= delta;
        } else {
            let phi = deficit / delta;
            if let Some(kk) = ch.on {
                x[i * k + kk] = 1.0 - phi;
            }
            if let Some(kk) = cl.on {
                x[i * k + kk] = phi;
            }
            deficit = 0.0;
        }
    }

    Ok(finish(x, dual_mu))
}

/// Single-period benchmark LP with the inventory budgeted uniformly over
/// `tau` periods: budget `n/τ`. Returns a one-row plan.
pub fn solve_lp_avg(
    lambda_row: &[f64],
    inventory: f64,
    tau: usize,
    prices: &PriceGrid,
) -> Result<PricingPlan> {
    if tau == 0 {
        return Err(Error::invalid("tau must be >= 1"));
    }
    let m = MeanDemandMatrix::new(1, lambda_row.len(), lambda_row.to_vec())?;
    solve_lp(&m, 0, inventory / tau as f64, prices)
}

/// Outcome of [`check_certificate`].
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub pass: bool,
    pub violations: Vec<String>,
}

/// KKT-style optimality certificate: feasibility, complementary slackness
/// of the inventory dual, and the per-row support condition that positive
/// mass sits only on maximizers of the reduced value λ(p − μ), with fully
/// allocated rows wherever the best reduced value is strictly positive.
pub fn check_certificate(
    plan: &PricingPlan,
    lambda: &MeanDemandMatrix,
    inventory: f64,
    prices: &PriceGrid,
) -> CertificateReport {
    let mut violations = Vec::new();
    let k = prices.len();
    let pv = prices.prices();
    if plan.num_prices != k || plan.start + plan.rows() != lambda.horizon() {
        violations.push(format!(
            "dimension mismatch: plan {}x{} from {}, lambda {}x{}",
            plan.rows(),
            plan.num_prices,
            plan.start,
            lambda.horizon(),
            lambda.num_prices()
        ));
        return CertificateReport {
            pass: false,
            violations,
        };
    }

    let inv_tol = OBJECTIVE_TOL * inventory.max(1.0);
    let mut consumption = 0.0;
    let mut objective = 0.0;
    for i in 0..plan.rows() {
        let row = plan.row(i);
        let lam = lambda.row(plan.start + i);
        let mut row_sum = 0.0;
        for kk in 0..k {
            let v = row[kk];
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                violations.push(format!("x[{i},{kk}] = {v} outside [0,1]"));
            }
            row_sum += v;
            consumption += v * lam[kk];
            objective += v * lam[kk] * pv[kk];
        }
        if row_sum > 1.0 + ROW_SUM_TOL {
            violations.push(format!("row {i} sums to {row_sum}"));
        }
    }
    if consumption > inventory + inv_tol {
        violations.push(format!(
            "consumption {consumption} exceeds inventory {inventory}"
        ));
    }
    if (objective - plan.objective).abs() > 1e-9 * plan.objective.abs().max(1.0) {
        violations.push(format!(
            "stored objective {} differs from recomputed {objective}",
            plan.objective
        ));
    }
    if plan.dual_mu < 0.0 {
        violations.push(format!("dual_mu {} negative", plan.dual_mu));
    }
    // Complementary slackness.
    if plan.dual_mu * (inventory - consumption) > inv_tol {
        violations.push(format!(
            "complementary slackness: mu {} * slack {}",
            plan.dual_mu,
            inventory - consumption
        ));
    }
    // Row support conditions at the reported dual.
    for i in 0..plan.rows() {
        let row = plan.row(i);
        let lam = lambda.row(plan.start + i);
        let reduced: Vec<f64> = (0..k).map(|kk| lam[kk] * (pv[kk] - plan.dual_mu)).collect();
        let row_max = reduced.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tie_tol = 1e-9 * row_max.abs().max(1.0);
        let mut row_sum = 0.0;
        for kk in 0..k {
            row_sum += row[kk];
            if row[kk] > 1e-9 {
                if reduced[kk] < row_max - tie_tol {
                    violations.push(format!(
                        "x[{i},{kk}] = {} on non-argmax column (reduced {} < max {row_max})",
                        row[kk], reduced[kk]
                    ));
                }
                if row_max < -1e-9 {
                    violations.push(format!("x[{i},{kk}] positive but row max {row_max} < 0"));
                }
            }
        }
        if row_max > 1e-9 && (row_sum - 1.0).abs() > ROW_SUM_TOL {
            violations.push(format!(
                "row {i} under-allocated: sum {row_sum} with positive max {row_max}"
            ));
        }
    }
    CertificateReport {
        pass: violations.is_empty(),
        violations,
    }
}

/// Independent dense-simplex solver over the same constraint set, with
/// Bland's rule. Slow and simple; the test suites use it as the oracle for
/// [`solve_lp`].
pub fn solve_lp_reference(
    lambda: &MeanDemandMatrix,
    start: usize,
    inventory: f64,
    prices: &PriceGrid,
) -> Result<PricingPlan> {
    if !(inventory >= 0.0) {
        return Err(Error::invalid("inventory must be >= 0"));
    }
    let k = prices.len();
    let horizon = lambda.horizon();
    if start >= horizon {
        return Ok(PricingPlan {
            start,
            num_prices: k,
            x: Vec::new(),
            objective: 0.0,
            dual_mu: 0.0,
        });
    }
    let nrows = horizon - start;
    let nx = nrows * k; // structural variables
    let m = nrows + 1; // row caps + inventory
    let ncols = nx + m; // + slacks
    let pv = prices.prices();

    // Tableau rows: [A | I | b]; objective row holds -c for maximization.
    let width = ncols + 1;
    let mut tab = vec![0.0; (m + 1) * width];
    for i in 0..nrows {
        for kk in 0..k {
            tab[i * width + i * k + kk] = 1.0;
        }
        tab[i * width + nx + i] = 1.0;
        tab[i * width + ncols] = 1.0;
    }
    {
        let inv_row = nrows;
        for i in 0..nrows {
            let lam = lambda.row(start + i);
            for kk in 0..k {
                tab[inv_row * width + i * k + kk] = lam[kk];
            }
        }
        tab[inv_row * width + nx + nrows] = 1.0;
        tab[inv_row * width + ncols] = inventory;
    }
    for i in 0..nrows {
        let lam = lambda.row(start + i);
        for kk in 0..k {
            tab[m * width + i * k + kk] = -(lam[kk] * pv[kk]);
        }
    }

    let mut basis: Vec<usize> = (nx..ncols).collect();
    const EPS: f64 = 1e-9;
    let max_pivots = 50 * (ncols + m);
    let mut pivots = 0;
    loop {
        // Bland: entering = lowest-index column with negative objective row.
        let mut entering = None;
        for j in 0..ncols {
            if tab[m * width + j] < -EPS {
                entering = Some(j);
                break;
            }
        }
        let Some(e) = entering else { break };
        // Ratio test, ties to the lowest basis variable index (Bland).
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tab[i * width + e];
            if a > EPS {
                let ratio = tab[i * width + ncols] / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12
                            || ((ratio - lr).abs() <= 1e-12 && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((li, _)) = leave else {
            return Err(Error::Solver("unbounded reference LP".into()));
        };
        // Pivot.
        let piv = tab[li * width + e];
        for j in 0..width {
            tab[li * width + j] /= piv;
        }
        for i in 0..=m {
            if i == li {
                continue;
            }
            let f = tab[i * width + e];
            if f != 0.0 {
                for j in 0..width {
                    tab[i * width + j] -= f * tab[li * width + j];
                }
            }
        }
        basis[li] = e;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver(format!(
                "reference simplex exceeded {max_pivots} pivots"
            )));
        }
    }

    let mut x = vec![0.0; nx];
    for (i, &b) in basis.iter().enumerate() {
        if b < nx {
            x[b] = tab[i * width + ncols];
        }
    }
    let objective = {
        let mut obj = 0.0;
        for i in 0..nrows {
            let lam = lambda.row(start + i);
            for kk in 0..k {
                obj += x[i * k + kk] * lam[kk] * pv[kk];
            }
        }
        obj
    };
    // Dual of the inventory constraint = objective-row entry of its slack.
    let dual_mu = tab[m * width + nx + nrows].max(0.0);
    Ok(PricingPlan {
        start,
        num_prices: k,
        x: x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        objective,
        dual_mu,
    })
}
