//! Episode and trial execution.
//!
//! An episode runs `T` periods against a fresh inventory of `n0` units:
//! the policy picks an action, demand is drawn (even with zero inventory —
//! the posterior still learns from it), sales are capped by the remaining
//! inventory, and the uncensored demand is fed back to the policy. A trial
//! is `S` sequential episodes sharing one evolving policy state.
//!
//! All randomness flows through a single per-trial ChaCha stream in a fixed
//! interleaving (policy draws first, then the demand draw), so a trial is a
//! pure function of its seed and configuration.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::demand::{Action, DemandEnvironment};
use crate::error::{Error, Result};
use crate::policies::{PolicyKind, PolicyState};
use crate::posterior::{PosteriorState, PriorSpec};

/// One period of an episode trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodRecord {
    /// 0-based period index.
    pub t: usize,
    pub action: Action,
    /// Realized demand D.
    pub demand: u64,
    /// Satisfied demand min(D, inventory-before).
    pub satisfied: u64,
    /// price · satisfied (0 under shut-off).
    pub revenue: f64,
    pub inventory_after: u64,
}

/// Full record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub periods: Vec<PeriodRecord>,
    pub revenue: f64,
    /// Demand units that arrived after the inventory ran dry.
    pub lost_sales: u64,
}

/// Lightweight summary of the posterior at the end of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub total_observations: u64,
}

/// Per-episode revenues of one trial plus the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub revenues: Vec<f64>,
    pub seed: u64,
    pub posterior: Option<PosteriorSummary>,
}

/// Derives the rng seed for trial `index` under `base_seed`
/// (SplitMix64-style mixing, so neighboring indices decorrelate).
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The per-trial random stream.
pub fn trial_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Runs one episode, mutating the policy state in place.
pub fn run_episode(
    env: &DemandEnvironment,
    policy: &mut PolicyState,
    n0: u64,
    rng: &mut ChaCha12Rng,
) -> Result<EpisodeTrace> {
    if policy.horizon() != env.horizon() {
        return Err(Error::invalid("policy/environment horizon mismatch"));
    }
    policy.begin_episode(n0, rng)?;
    let mut inventory = n0;
    let mut revenue = 0.0;
    let mut lost_sales = 0u64;
    let mut periods = Vec::with_capacity(env.horizon());
    for t in 0..env.horizon() {
        let action = policy.choose_price(t, inventory, rng)?;
        let demand = env.sample_demand(t, action, rng)?;
        let satisfied = demand.min(inventory);
        let price = match action {
            Action::Price(k) => env.grid().price(k),
            Action::Shutoff => 0.0,
        };
        let period_revenue = price * satisfied as f64;
        inventory -= satisfied;
        revenue += period_revenue;
        lost_sales += demand - satisfied;
        policy.observe(t, action, demand)?;
        periods.push(PeriodRecord {
            t,
            action,
            demand,
            satisfied,
            revenue: period_revenue,
            inventory_after: inventory,
        });
    }
    policy.end_episode();
    Ok(EpisodeTrace {
        periods,
        revenue,
        lost_sales,
    })
}

/// Builds the policy state for a trial: learning kinds need a prior,
/// oracle kinds take the environment's true means.
pub fn build_policy(
    env: &DemandEnvironment,
    kind: PolicyKind,
    prior: Option<&PriorSpec>,
) -> Result<PolicyState> {
    if kind.is_learning() {
        let spec = prior.ok_or_else(|| {
            Error::invalid(format!("policy {kind} requires a prior specification"))
        })?;
        let posterior = PosteriorState::new(spec, env.horizon(), env.grid().clone())?;
        PolicyState::with_posterior(kind, posterior)
    } else {
        PolicyState::with_true_means(kind, env.mean_demand(), env.grid().clone())
    }
}

/// Runs `episodes` sequential episodes under one policy state.
pub fn run_trial(
    env: &DemandEnvironment,
    kind: PolicyKind,
    prior: Option<&PriorSpec>,
    n0: u64,
    episodes: usize,
    seed: u64,
) -> Result<TrialResult> {
    if episodes == 0 {
        return Err(Error::invalid("trial needs at least one episode"));
    }
    let mut policy = build_policy(env, kind, prior)?;
    let mut rng = trial_rng(seed);
    let mut revenues = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let trace = run_episode(env, &mut policy, n0, &mut rng)?;
        revenues.push(trace.revenue);
    }
    let posterior = policy.posterior().map(|p| PosteriorSummary {
        total_observations: p.stats().total_observations(),
    });
    Ok(TrialResult {
        revenues,
        seed,
        posterior,
    })
}
