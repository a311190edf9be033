//! Online resource allocation under random arrival order.
//!
//! A fixed multiset of items — each a concave utility plus a resource
//! consumption matrix — arrives in uniformly random order; an online
//! policy must irrevocably set each item's variable, never exceeding the
//! resource budgets. This crate provides:
//!
//! - [`model`]: instances, utility families (linear over a simplex,
//!   scalar concave), Fenchel conjugates, and the dual-to-primal
//!   assignment rule shared by every policy.
//! - [`lp`]: a dense bounded-variable primal simplex with exact duals,
//!   the offline block LP, and a brute-force vertex oracle for tests.
//! - [`schedule`]: the doubling-level step-size and normalization tables
//!   of the exponentiated-subgradient method.
//! - [`algorithms`]: the exponentiated-subgradient runner, the
//!   feasibility-problem greedy, and the one-time / dynamic-learning /
//!   prefix-LP baselines, all guarded to hard budget feasibility.
//! - [`generators`]: seeded, bit-exact instance generators (the
//!   adversarial binary-mask multiset among them) and permutations.
//! - [`diagnostics`]: martingale traces, the exponential potential, and
//!   Monte-Carlo event frequencies against their analytic bounds.

pub mod algorithms;
pub mod diagnostics;
pub mod generators;
pub mod lp;
pub mod model;
pub mod schedule;

pub use algorithms::{
    algorithm1_run, dla_run, dual_estimate, esa_run, esa_run_opts, estimate_prefix_value,
    krtv_run, ola_run, DualNoise, EsaState, GuardRule, RunOptions,
};
pub use lp::{offline_optimum, solve_lp, vertex_oracle, LpProblem, LpSolution, LpStatus};
pub use model::{Decision, GammaBound, Instance, Item, Matrix, RunResult, UtilityFunction};
pub use schedule::{build_schedule, Schedule};
