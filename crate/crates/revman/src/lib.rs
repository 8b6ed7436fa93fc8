//! Episodic revenue-management simulator.
//!
//! A seller runs repeated selling seasons of `T` periods with a fresh
//! inventory each season, choosing among `K` feasible prices (or a shut-off
//! price) per period under an unknown, time-varying demand law. This crate
//! implements:
//!
//! - the demand environments and their exact samplers ([`demand`]),
//! - Bayesian posteriors over the mean-demand matrix ([`posterior`]),
//! - the fluid LP relaxation and its benchmark variant ([`lp`]),
//! - the exact hindsight dynamic-programming oracle ([`dp`]),
//! - six LP-based pricing policies ([`policies`]),
//! - the episode/trial simulation engine ([`sim`]),
//! - regret aggregation ([`regret`]), and
//! - an experiment harness with named presets and a CLI ([`harness`]).

pub mod cli;
pub mod demand;
pub mod dp;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lp;
pub mod policies;
pub mod posterior;
pub mod regret;
pub mod sim;

pub use demand::{Action, DemandEnvironment, EnvironmentSpec, MeanDemandMatrix, PriceGrid};
pub use error::{Error, Result};
pub use lp::{check_certificate, solve_lp, solve_lp_avg, solve_lp_reference, PricingPlan};
pub use posterior::{PosteriorState, PriorSpec};
