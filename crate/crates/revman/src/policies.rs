//! The six pricing policies behind one uniform contract.
//!
//! Learning policies hold a posterior; oracle (`*`) variants of the two
//! proposed policies hold the true mean-demand matrix instead:
//!
//! - `ts-episodic` — sample θ_s once per episode, solve the fluid LP for
//!   the whole season, and play its rows.
//! - `ts-dynamic` — resample θ and re-solve the LP from the current period
//!   and inventory at every period.
//! - `ts-fixed-star` — sample θ_s once per episode, then per period solve
//!   the single-period benchmark LP with the fixed budget n0/T.
//! - `ts-update-star` — same sampling, but budget inventory/(remaining).
//! - `ts-episodic-star` / `ts-dynamic-star` — the proposed policies with
//!   the true θ in place of a posterior sample.
//!
//! A policy is driven as `begin_episode` → T × (`choose_price` → `observe`).

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::Rng;

use crate::demand::{Action, MeanDemandMatrix, PriceGrid};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, solve_lp_avg, PricingPlan};
use crate::posterior::PosteriorState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    TsEpisodic,
    TsDynamic,
    TsFixedStar,
    TsUpdateStar,
    TsEpisodicStar,
    TsDynamicStar,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::TsEpisodic,
        PolicyKind::TsDynamic,
        PolicyKind::TsFixedStar,
        PolicyKind::TsUpdateStar,
        PolicyKind::TsEpisodicStar,
        PolicyKind::TsDynamicStar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::TsEpisodic => "ts-episodic",
            PolicyKind::TsDynamic => "ts-dynamic",
            PolicyKind::TsFixedStar => "ts-fixed-star",
            PolicyKind::TsUpdateStar => "ts-update-star",
            PolicyKind::TsEpisodicStar => "ts-episodic-star",
            PolicyKind::TsDynamicStar => "ts-dynamic-star",
        }
    }

    /// Whether the policy learns from observations (holds a posterior).
    pub fn is_learning(self) -> bool {
        !matches!(self, PolicyKind::TsEpisodicStar | PolicyKind::TsDynamicStar)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ts-episodic" => Ok(PolicyKind::TsEpisodic),
            "ts-dynamic" => Ok(PolicyKind::TsDynamic),
            "ts-fixed-star" => Ok(PolicyKind::TsFixedStar),
            "ts-update-star" => Ok(PolicyKind::TsUpdateStar),
            "ts-episodic-star" => Ok(PolicyKind::TsEpisodicStar),
            "ts-dynamic-star" => Ok(PolicyKind::TsDynamicStar),
            other => Err(Error::invalid(format!("unknown policy {other:?}"))),
        }
    }
}

/// Mutable per-policy state threaded through a trial.
pub struct PolicyState {
    kind: PolicyKind,
    grid: PriceGrid,
    horizon: usize,
    posterior: Option<PosteriorState>,
    true_means: Option<MeanDemandMatrix>,
    /// θ_s sampled at the top of the episode (episodic / fixed* / update*).
    episode_sample: Option<MeanDemandMatrix>,
    /// Season plan for the plan-ahead policies.
    plan: Option<PricingPlan>,
    /// Episode initial inventory, as given to `begin_episode`.
    episode_n0: u64,
    episode_open: bool,
    /// Oracle caches: θ is fixed, so LP solutions are reusable.
    episodic_star_cache: BTreeMap<u64, PricingPlan>,
    dynamic_star_cache: BTreeMap<(usize, u64), PricingPlan>,
    lp_solves: u64,
}

impl PolicyState {
    /// Builds a learning policy around a posterior.
    pub fn with_posterior(kind: PolicyKind, posterior: PosteriorState) -> Result<Self> {
        if !kind.is_learning() {
            return Err(Error::invalid(format!(
                "{kind} is an oracle policy; construct it with true means"
            )));
        }
        Ok(PolicyState {
            kind,
            grid: posterior.grid().clone(),
            horizon: posterior.horizon(),
            posterior: Some(posterior),
            true_means: None,
            episode_sample: None,
            plan: None,
            episode_n0: 0,
            episode_open: false,
            episodic_star_cache: BTreeMap::new(),
            dynamic_star_cache: BTreeMap::new(),
            lp_solves: 0,
        })
    }

    /// Builds an oracle policy from the true mean-demand matrix.
    pub fn with_true_means(
        kind: PolicyKind,
        means: MeanDemandMatrix,
        grid: PriceGrid,
    ) -> Result<Self> {
        if kind.is_learning() {
            return Err(Error::invalid(format!(
                "{kind} learns from data; construct it with a posterior"
            )));
        }
        if means.num_prices() != grid.len() {
            return Err(Error::invalid("means/grid dimensions mismatch"));
        }
        Ok(PolicyState {
            kind,
            grid,
            horizon: means.horizon(),
            posterior: None,
            true_means: Some(means),
            episode_sample: None,
            plan: None,
            episode_n0: 0,
            episode_open: false,
            episodic_star_cache: BTreeMap::new(),
            dynamic_star_cache: BTreeMap::new(),
            lp_solves: 0,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn posterior(&self) -> Option<&PosteriorState> {
        self.posterior.as_ref()
    }

    /// Number of LP solver invocations so far (cache hits excluded).
    pub fn lp_solves(&self) -> u64 {
        self.lp_solves
    }

    /// Episode plan currently in force, if the policy keeps one.
    pub fn current_plan(&self) -> Option<&PricingPlan> {
        self.plan.as_ref()
    }

    fn solve_full_lp(
        &mut self,
        means: &MeanDemandMatrix,
        start: usize,
        inv: f64,
    ) -> Result<PricingPlan> {
        self.lp_solves += 1;
        solve_lp(means, start, inv, &self.grid)
    }

    /// Opens a new episode with inventory `n0`.
    pub fn begin_episode<R: Rng + ?Sized>(&mut self, n0: u64, rng: &mut R) -> Result<()> {
        self.episode_n0 = n0;
        self.episode_sample = None;
        self.plan = None;
        match self.kind {
            PolicyKind::TsEpisodic => {
                let theta = self.posterior.as_mut().unwrap().sample_posterior(rng)?;
                let plan = self.solve_full_lp(&theta, 0, n0 as f64)?;
                self.episode_sample = Some(theta);
                self.plan = Some(plan);
            }
            PolicyKind::TsFixedStar | PolicyKind::TsUpdateStar => {
                let theta = self.posterior.as_mut().unwrap().sample_posterior(rng)?;
                self.episode_sample = Some(theta);
            }
            PolicyKind::TsEpisodicStar => {
                let plan = match self.episodic_star_cache.get(&n0) {
                    Some(p) => p.clone(),
                    None => {
                        let means = self.true_means.clone().unwrap();
                        let p = self.solve_full_lp(&means, 0, n0 as f64)?;
                        self.episodic_star_cache.insert(n0, p.clone());
                        p
                    }
                };
                self.plan = Some(plan);
            }
            PolicyKind::TsDynamic | PolicyKind::TsDynamicStar => {}
        }
        self.episode_open = true;
        Ok(())
    }

    /// Chooses the action for period `t` (0-based) given current inventory.
    pub fn choose_price<R: Rng + ?Sized>(
        &mut self,
        t: usize,
        inventory: u64,
        rng: &mut R,
    ) -> Result<Action> {
        if !self.episode_open {
            return Err(Error::invalid("choose_price before begin_episode"));
        }
        if t >= self.horizon {
            return Err(Error::invalid(format!(
                "period {t} outside horizon {}",
                self.horizon
            )));
        }
        match self.kind {
            PolicyKind::TsEpisodic | PolicyKind::TsEpisodicStar => {
                let plan = self.plan.as_ref().expect("episode plan present");
                Ok(sample_action(plan.row(t), rng))
            }
            PolicyKind::TsDynamic => {
                let theta = self.posterior.as_mut().unwrap().sample_posterior(rng)?;
                let plan = self.solve_full_lp(&theta, t, inventory as f64)?;
                Ok(sample_action(plan.row(0), rng))
            }
            PolicyKind::TsDynamicStar => {
                let key = (t, inventory);
                if !self.dynamic_star_cache.contains_key(&key) {
                    let means = self.true_means.clone().unwrap();
                    let plan = self.solve_full_lp(&means, t, inventory as f64)?;
                    self.dynamic_star_cache.insert(key, plan);
                }
                let plan = &self.dynamic_star_cache[&key];
                Ok(sample_action(plan.row(0), rng))
            }
            PolicyKind::TsFixedStar => {
                let theta = self.episode_sample.as_ref().expect("episode sample present");
                let row = theta.row(t).to_vec();
                self.lp_solves += 1;
                let plan = solve_lp_avg(&row, self.episode_n0 as f64, self.horizon, &self.grid)?;
                Ok(sample_action(plan.row(0), rng))
            }
            PolicyKind::TsUpdateStar => {
                let theta = self.episode_sample.as_ref().expect("episode sample present");
                let row = theta.row(t).to_vec();
                self.lp_solves += 1;
                let plan = solve_lp_avg(&row, inventory as f64, self.horizon - t, &self.grid)?;
                Ok(sample_action(plan.row(0), rng))
            }
        }
    }

    /// Feeds the realized demand back; oracle policies ignore it.
    pub fn observe(&mut self, t: usize, action: Action, demand: u64) -> Result<()> {
        if let Some(posterior) = self.posterior.as_mut() {
            posterior.update(t, action, demand)?;
        }
        Ok(())
    }

    /// Closes the episode (plan-ahead plans stay queryable until the next
    /// `begin_episode`).
    pub fn end_episode(&mut self) {
        self.episode_open = false;
    }
}

/// Samples a price index from a sub-probability row, shut-off with the
/// residual mass; consumes exactly one uniform draw.
fn sample_action<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> Action {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (k, p) in row.iter().enumerate() {
        cum += p;
        if u < cum {
            return Action::Price(k);
        }
    }
    Action::Shutoff
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::PriorSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn means_2x2() -> (MeanDemandMatrix, PriceGrid) {
        (
            MeanDemandMatrix::new(2, 2, vec![3.0, 1.0, 2.0, 1.0]).unwrap(),
            PriceGrid::new(vec![1.0, 2.0]).unwrap(),
        )
    }

    fn gamma_posterior(horizon: usize, k: usize) -> PosteriorState {
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
    fn kind_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.name().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("ts-bogus".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn constructor_kind_mismatch_rejected() {
        let (means, grid) = means_2x2();
        assert!(PolicyState::with_true_means(PolicyKind::TsEpisodic, means, grid).is_err());
        let post = gamma_posterior(2, 2);
        assert!(PolicyState::with_posterior(PolicyKind::TsEpisodicStar, post).is_err());
    }

    #[test]
    fn episodic_star_plan_matches_lp_objective() {
        let (means, grid) = means_2x2();
        let mut policy =
            PolicyState::with_true_means(PolicyKind::TsEpisodicStar, means.clone(), grid.clone())
                .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        policy.begin_episode(2, &mut rng).unwrap();
        let direct = solve_lp(&means, 0, 2.0, &grid).unwrap();
        assert_eq!(policy.current_plan().unwrap().objective, direct.objective);
        // Second episode reuses the cached plan: solver called once.
        policy.begin_episode(2, &mut rng).unwrap();
        assert_eq!(policy.lp_solves(), 1);
    }

    #[test]
    fn zero_inventory_plan_always_shutoff() {
        let (means, grid) = means_2x2();
        let mut policy =
            PolicyState::with_true_means(PolicyKind::TsEpisodicStar, means, grid).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        policy.begin_episode(0, &mut rng).unwrap();
        assert!(policy.current_plan().unwrap().x.iter().all(|v| *v == 0.0));
        for _ in 0..50 {
            assert_eq!(
                policy.choose_price(0, 0, &mut rng).unwrap(),
                Action::Shutoff
            );
        }
    }

    #[test]
    fn dynamic_star_zero_inventory_shutoff() {
        let (means, grid) = means_2x2();
        let mut policy =
            PolicyState::with_true_means(PolicyKind::TsDynamicStar, means, grid).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        policy.begin_episode(4, &mut rng).unwrap();
        for _ in 0..50 {
            assert_eq!(
                policy.choose_price(1, 0, &mut rng).unwrap(),
                Action::Shutoff
            );
        }
    }

    #[test]
    fn action_frequencies_match_plan_row() {
        let row = [0.3, 0.7];
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            match sample_action(&row, &mut rng) {
                Action::Price(k) => counts[k] += 1,
                Action::Shutoff => counts[2] += 1,
            }
        }
        let f0 = counts[0] as f64 / n as f64;
        let f1 = counts[1] as f64 / n as f64;
        // 4 sigma of a Bernoulli(p) frequency over n draws.
        let sig = |p: f64| 4.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((f0 - 0.3).abs() < sig(0.3), "f0 {f0}");
        assert!((f1 - 0.7).abs() < sig(0.7), "f1 {f1}");
        assert_eq!(counts[2], 0);
    }

    #[test]
    fn observe_updates_learning_only() {
        let (means, grid) = means_2x2();
        let mut oracle =
            PolicyState::with_true_means(PolicyKind::TsEpisodicStar, means, grid).unwrap();
        oracle.observe(0, Action::Price(0), 4).unwrap();
        assert!(oracle.posterior().is_none());

        let mut learner =
            PolicyState::with_posterior(PolicyKind::TsEpisodic, gamma_posterior(2, 2)).unwrap();
        learner.observe(0, Action::Price(1), 4).unwrap();
        assert_eq!(learner.posterior().unwrap().stats().count(0, 1), 1);
        assert_eq!(learner.posterior().unwrap().stats().sum(0, 1), 4);
        // Shut-off observations leave the stats untouched.
        learner.observe(0, Action::Shutoff, 9).unwrap();
        assert_eq!(learner.posterior().unwrap().stats().total_observations(), 1);
    }

    #[test]
    fn lp_call_counts_per_episode() {
        // Plan-ahead learning policy: exactly one solve per episode.
        let mut episodic =
            PolicyState::with_posterior(PolicyKind::TsEpisodic, gamma_posterior(3, 2)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for episode in 1..=4u64 {
            episodic.begin_episode(5, &mut rng).unwrap();
            let mut inv = 5u64;
            for t in 0..3 {
                let a = episodic.choose_price(t, inv, &mut rng).unwrap();
                if a != Action::Shutoff {
                    inv = inv.saturating_sub(1);
                }
            }
            assert_eq!(episodic.lp_solves(), episode);
        }
        // Dynamic learning policy: exactly T solves per episode.
        let mut dynamic =
            PolicyState::with_posterior(PolicyKind::TsDynamic, gamma_posterior(3, 2)).unwrap();
        for episode in 1..=3u64 {
            dynamic.begin_episode(5, &mut rng).unwrap();
            for t in 0..3 {
                dynamic.choose_price(t, 5, &mut rng).unwrap();
            }
            assert_eq!(dynamic.lp_solves(), 3 * episode);
        }
    }

    #[test]
    fn fixed_star_ignores_inventory() {
        let mut a =
            PolicyState::with_posterior(PolicyKind::TsFixedStar, gamma_posterior(2, 2)).unwrap();
        let mut b =
            PolicyState::with_posterior(PolicyKind::TsFixedStar, gamma_posterior(2, 2)).unwrap();
        let mut rng_a = ChaCha12Rng::seed_from_u64(33);
        let mut rng_b = ChaCha12Rng::seed_from_u64(33);
        a.begin_episode(6, &mut rng_a).unwrap();
        b.begin_episode(6, &mut rng_b).unwrap();
        for t in 0..2 {
            let act_a = a.choose_price(t, 6, &mut rng_a).unwrap();
            let act_b = b.choose_price(t, 0, &mut rng_b).unwrap();
            assert_eq!(act_a, act_b);
        }
    }

    #[test]
    fn update_star_at_horizon_one_matches_fixed_star() {
        // With a single period, remaining = T = 1, so the budgets n/1 and
        // n0/T coincide and the two benchmarks agree in law.
        let post1 = gamma_posterior(1, 2);
        let mut upd =
            PolicyState::with_posterior(PolicyKind::TsUpdateStar, post1.clone()).unwrap();
        let mut fxd = PolicyState::with_posterior(PolicyKind::TsFixedStar, post1).unwrap();
        let mut rng_u = ChaCha12Rng::seed_from_u64(44);
        let mut rng_f = ChaCha12Rng::seed_from_u64(44);
        let n = 4u64;
        upd.begin_episode(n, &mut rng_u).unwrap();
        fxd.begin_episode(n, &mut rng_f).unwrap();
        let a_u = upd.choose_price(0, n, &mut rng_u).unwrap();
        let a_f = fxd.choose_price(0, n, &mut rng_f).unwrap();
        assert_eq!(a_u, a_f);
    }

    #[test]
    fn choose_before_begin_is_error() {
        let (means, grid) = means_2x2();
        let mut policy =
            PolicyState::with_true_means(PolicyKind::TsDynamicStar, means, grid).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(policy.choose_price(0, 3, &mut rng).is_err());
    }
}
