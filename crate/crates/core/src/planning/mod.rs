//! Planners that choose observed feature configurations.

mod brute;
mod exact;
mod heuristic;
mod milp;
mod pwl;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::attacker::ScoreModel;
use crate::error::{FdpError, Result};
use crate::instance::{check_feasibility, FdpInstance, FeatureConfig};

pub use brute::{brute_force_plan, BruteForceOptions, DEFAULT_ENUMERATION_CAP, DEFAULT_GRID_STEP};
pub use exact::{plan_exact_discrete_cost, plan_unconstrained};
pub use heuristic::{plan_gradient, plan_greedy, GradientHyper, Optimizer};
pub use milp::{
    build_bs_model, build_fractional_model, plan_milp, plan_milp_bs, plan_milp_bs_with, plan_milp_with,
    MilpOptions,
};
pub use pwl::PiecewiseExpApprox;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub status: String,
    /// Branch-and-bound nodes (summed over all solves).
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Outer iterations: binary-search steps, Dinkelbach rounds, gradient
    /// steps or enumerated leaves, depending on the planner.
    pub iterations: usize,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
}

impl SolverStats {
    pub(crate) fn with_time(mut self, elapsed: Duration) -> Self {
        self.wall_time_s = elapsed.as_secs_f64();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub algorithm: String,
    pub config: FeatureConfig,
    /// True expected loss of `config` under the supplied model.
    pub expected_loss: f64,
    /// Additive approximation certificate on `expected_loss`, when the
    /// planner has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Objective value of the approximate model, when one was optimized.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surrogate_loss: Option<f64>,
    pub cost: f64,
    pub solver_stats: SolverStats,
}

impl PlanResult {
    pub(crate) fn finish(
        instance: &FdpInstance,
        model: &ScoreModel,
        algorithm: &str,
        config: FeatureConfig,
        stats: SolverStats,
    ) -> Result<Self> {
        let report = check_feasibility(instance, &config)?;
        if !report.is_feasible() {
            return Err(FdpError::Solver(format!(
                "{algorithm} produced an infeasible configuration ({} entry, {} constraint violations, cost {} vs budget {})",
                report.entry_violations.len(),
                report.constraint_violations.len(),
                report.cost,
                instance.budget()
            )));
        }
        Ok(Self {
            algorithm: algorithm.into(),
            expected_loss: crate::instance::expected_loss(instance, model, &config)?,
            config,
            bound: None,
            surrogate_loss: None,
            cost: report.cost,
            solver_stats: stats,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let r: PlanResult = serde_json::from_str(s)?;
        if r.config.n() == 0 || r.config.m() == 0 {
            return Err(FdpError::InvalidInstance("plan configuration is empty".into()));
        }
        Ok(r)
    }
}

/// Classical weights of a model, or a precondition error.
pub(crate) fn classical_weights<'a>(model: &'a ScoreModel, m: usize, planner: &str) -> Result<&'a [f64]> {
    model.check_features(m)?;
    match model {
        ScoreModel::Classical { weights } => Ok(weights),
        _ => Err(FdpError::Precondition(format!("{planner} needs a classical score model"))),
    }
}

/// Whether `config` satisfies entries, constraints and budget.
pub(crate) fn is_feasible(instance: &FdpInstance, config: &FeatureConfig) -> bool {
    check_feasibility(instance, config).map(|r| r.is_feasible()).unwrap_or(false)
}
