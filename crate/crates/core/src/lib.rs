//! Learning and planning toolkit for the feature deception problem (FDP).
//!
//! A defender protects `n` targets, each described by `m` observable features.
//! The attacker sees only the observed values and picks a target with
//! probability proportional to a positive score of its feature vector. The
//! defender may move observed values away from the actual ones, subject to
//! per-entry feasibility sets, per-target linear constraints and a deception
//! budget, to minimize its expected loss.
//!
//! The crate is organized by concern:
//!
//! - [`instance`]: the problem model, feasibility checks, deception cost and
//!   the expected-loss functional.
//! - [`attacker`]: attacker score models, induced attack distributions,
//!   sampling and the log-likelihood used for learning.
//! - [`dataset`]: attack logs grouped by observed configuration.
//! - [`learning`]: the closed-form linear-system estimator, gradient-based
//!   maximum likelihood, error metrics, sample-complexity bounds and data
//!   poisoning.
//! - [`solver`]: a self-contained LP simplex and best-first branch-and-bound
//!   MILP backend.
//! - [`planning`]: piecewise-linear MILP planners (direct and binary search),
//!   greedy, gradient, special-case exact planners and a brute-force oracle.
//! - [`experiments`]: random instance generators, experiment pipelines and the
//!   credit-bureau case study.

pub mod attacker;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod instance;
pub mod learning;
pub mod planning;
pub mod rng;
pub mod solver;

pub use attacker::{Neural3, Requirement, ScoreModel};
pub use dataset::{AttackDataset, AttackGroup};
pub use error::{FdpError, Result};
pub use instance::{
    BinaryDomain, EntryDomain, FdpInstance, FeasibilityReport, FeatureConfig, FeatureKind,
    LinearConstraint, Relation, FEASIBILITY_TOL,
};
pub use planning::{PlanResult, SolverStats};
