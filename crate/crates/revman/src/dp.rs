//! Exact finite-horizon dynamic program for the hindsight-optimal policy.
//!
//! `V[t][n]` is the optimal expected revenue with `t` remaining periods and
//! `n` units of inventory; the recurrence maximizes over the shut-off price
//! and each real price `p_k`:
//!
//! ```text
//! V[t][n] = max_k Σ_d P(min(D, n) = d) · (p_k·d + V[t−1][n−d])
//! ```
//!
//! where the demand distribution is the one at period `T−t` (0-based) and
//! the shut-off contributes `V[t−1][n]`. Capping is exact: probabilities
//! `d < n` come from the pmf and `d = n` carries the full upper tail, so
//! there is no truncation error beyond pmf tail arithmetic.

use crate::demand::{Action, DemandEnvironment};
use crate::error::{Error, Result};

/// Value and optimal-action tables from the backward recursion.
#[derive(Debug, Clone)]
pub struct ValueTable {
    horizon: usize,
    n0: usize,
    /// (T+1) × (n0+1), row t = remaining periods.
    v: Vec<f64>,
    /// T × (n0+1), row t−1 = optimal action with t remaining periods.
    actions: Vec<Action>,
}

impl ValueTable {
    #[inline]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn initial_inventory(&self) -> usize {
        self.n0
    }

    /// V with `remaining` periods to go and `inventory` units left.
    pub fn value(&self, remaining: usize, inventory: usize) -> f64 {
        self.v[remaining * (self.n0 + 1) + inventory]
    }

    /// Rev*(T, θ) = V[T][n0].
    pub fn rev_star(&self) -> f64 {
        self.value(self.horizon, self.n0)
    }

    /// Optimal action at 0-based period `elapsed` (so `T − elapsed` periods
    /// remain, the current one included) with `inventory` units left.
    pub fn oracle_policy_action(&self, elapsed: usize, inventory: u64) -> Result<Action> {
        if elapsed >= self.horizon {
            return Err(Error::invalid(format!(
                "elapsed {elapsed} outside horizon {}",
                self.horizon
            )));
        }
        if inventory > self.n0 as u64 {
            return Err(Error::invalid(format!(
                "inventory {inventory} exceeds table bound {}",
                self.n0
            )));
        }
        let remaining = self.horizon - elapsed;
        Ok(self.actions[(remaining - 1) * (self.n0 + 1) + inventory as usize])
    }
}

/// Runs the backward recursion up to initial inventory `n0`.
///
/// Per-cell capped pmfs are precomputed once to `n0`; ties among optimal
/// actions break toward shut-off, then the lowest price index.
pub fn solve_dp(env: &DemandEnvironment, n0: u64) -> Result<ValueTable> {
    let horizon = env.horizon();
    let num_prices = env.num_prices();
    let n0 = usize::try_from(n0).map_err(|_| Error::invalid("n0 too large"))?;
    let width = n0 + 1;

    // Per-(t, k): capped pmf to n0 plus head cumulative sums and d-weighted
    // head sums, so the tail lump and revenue-on-sales terms are O(1).
    let mut pmfs: Vec<Vec<f64>> = Vec::with_capacity(horizon * num_prices);
    let mut cum: Vec<Vec<f64>> = Vec::with_capacity(horizon * num_prices);
    let mut wcum: Vec<Vec<f64>> = Vec::with_capacity(horizon * num_prices);
    for t in 0..horizon {
        for k in 0..num_prices {
            let pmf = env.capped_demand_pmf(t, k, n0 as u64)?;
            let mut c = Vec::with_capacity(pmf.len());
            let mut w = Vec::with_capacity(pmf.len());
            let (mut cs, mut ws) = (0.0, 0.0);
            for (d, p) in pmf.iter().enumerate() {
                cs += p;
                ws += d as f64 * p;
                c.push(cs);
                w.push(ws);
            }
            pmfs.push(pmf);
            cum.push(c);
            wcum.push(w);
        }
    }

    let mut v = vec![0.0; (horizon + 1) * width];
    let mut actions = vec![Action::Shutoff; horizon * width];
    for rem in 1..=horizon {
        let t = horizon - rem; // 0-based period when `rem` periods remain
        let (prev_rows, cur_rows) = v.split_at_mut(rem * width);
        let prev = &prev_rows[(rem - 1) * width..];
        let cur = &mut cur_rows[..width];
        for n in 0..=n0 {
            // Shut-off keeps the inventory and earns nothing now.
            let mut best = prev[n];
            let mut best_action = Action::Shutoff;
            if n > 0 {
                for k in 0..num_prices {
                    let idx = t * num_prices + k;
                    let pmf = &pmfs[idx];
                    let price = env.grid().price(k);
                    // Head: demand d < n sells d and leaves n − d.
                    let mut ev = price * wcum[idx][n - 1];
                    for d in 0..n {
                        ev += pmf[d] * prev[n - d];
                    }
                    // Tail: demand ≥ n sells out.
                    let tail = (1.0 - cum[idx][n - 1]).max(0.0);
                    ev += tail * (price * n as f64 + prev[0]);
                    if ev > best {
                        best = ev;
                        best_action = Action::Price(k);
                    }
                }
            }
            cur[n] = best;
            actions[(rem - 1) * width + n] = best_action;
        }
    }

    Ok(ValueTable {
        horizon,
        n0,
        v,
        actions,
    })
}
