//! Greedy extreme-score assignment and projected-gradient planning.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacker::{softmax, ScoreModel};
use crate::error::{FdpError, Result};
use crate::instance::{FdpInstance, FeatureConfig, FeatureKind, FEASIBILITY_TOL};
use crate::planning::{PlanResult, SolverStats};
use crate::rng::rng_from_seed;

const EXTREME_STEPS: usize = 200;
const EXTREME_STEP: f64 = 0.05;

/// Row of target `i` that maximizes (`sign = 1`) or minimizes (`sign = -1`)
/// the score over the entry box. Exact for classical weights; projected
/// gradient from the actual row otherwise, with binaries rounded at the end.
fn extreme_row(inst: &FdpInstance, model: &ScoreModel, i: usize, sign: f64) -> Result<Vec<f64>> {
    let m = inst.m();
    let ranges: Vec<(f64, f64)> = (0..m).map(|k| inst.entry_range(i, k)).collect();
    if let ScoreModel::Classical { weights } = model {
        return Ok((0..m)
            .map(|k| {
                let (lo, hi) = ranges[k];
                let up = sign * weights[k];
                if up > 0.0 {
                    hi
                } else if up < 0.0 {
                    lo
                } else {
                    inst.actual().get(i, k)
                }
            })
            .collect());
    }
    let mut x = inst.actual().row(i).to_vec();
    for _ in 0..EXTREME_STEPS {
        let (_, g) = model.log_score_input_grad(&x)?;
        for k in 0..m {
            let (lo, hi) = ranges[k];
            x[k] = (x[k] + sign * EXTREME_STEP * g[k]).clamp(lo, hi);
        }
    }
    for k in 0..m {
        if inst.kind(k) == FeatureKind::Binary {
            let (lo, hi) = ranges[k];
            x[k] = if lo == hi { lo } else { x[k].round() };
        }
    }
    // never return something worse than the actual row
    let base = model.log_score(inst.actual().row(i));
    if sign * (model.log_score(&x) - base) < 0.0 {
        x = inst.actual().row(i).to_vec();
    }
    Ok(x)
}

/// Sorts targets by loss and, from both ends inward, gives the lowest-loss
/// targets their highest-score row and the highest-loss targets their
/// lowest-score row while the budget allows.
pub fn plan_greedy(instance: &FdpInstance, model: &ScoreModel) -> Result<PlanResult> {
    let start = Instant::now();
    model.check_features(instance.m())?;
    let n = instance.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| instance.loss(a).total_cmp(&instance.loss(b)));
    let mut config = instance.actual().clone();
    let mut spent = 0.0;
    let mut try_assign = |i: usize, row: Vec<f64>, config: &mut FeatureConfig| {
        let c = instance.target_cost(i, &row);
        if spent + c <= instance.budget() + FEASIBILITY_TOL && instance.constraints_for(i).all(|k| k.is_satisfied(&row)) {
            spent += c;
            config.row_mut(i).copy_from_slice(&row);
        }
    };
    let (mut lo, mut hi) = (0usize, n.saturating_sub(1));
    let mut steps = 0;
    while lo < hi {
        let (a, b) = (order[lo], order[hi]);
        try_assign(a, extreme_row(instance, model, a, 1.0)?, &mut config);
        try_assign(b, extreme_row(instance, model, b, -1.0)?, &mut config);
        lo += 1;
        hi -= 1;
        steps += 1;
    }
    let stats = SolverStats {
        status: "done".into(),
        iterations: steps,
        ..Default::default()
    };
    PlanResult::finish(instance, model, "greedy", config, stats.with_time(start.elapsed()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    RmsProp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientHyper {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub steps: usize,
    /// The first restart starts at the actual configuration, later ones at
    /// uniform random points of the box.
    pub restarts: usize,
    /// Weight of the squared budget overrun.
    pub penalty: f64,
    pub seed: u64,
}

impl Default for GradientHyper {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            learning_rate: 0.02,
            steps: 300,
            restarts: 4,
            penalty: 1e3,
            seed: 0,
        }
    }
}

/// Loss, gradient with respect to every entry.
fn loss_grad(inst: &FdpInstance, model: &ScoreModel, x: &FeatureConfig) -> Result<(f64, Vec<f64>)> {
    let (n, m) = (inst.n(), inst.m());
    let mut g = Vec::with_capacity(n);
    let mut dg = Vec::with_capacity(n);
    for i in 0..n {
        let (v, d) = model.log_score_input_grad(x.row(i))?;
        g.push(v);
        dg.push(d);
    }
    let p = softmax(&g);
    let loss: f64 = p.iter().zip(inst.losses()).map(|(p, u)| p * u).sum();
    let mut grad = vec![0.0; n * m];
    for i in 0..n {
        let s = p[i] * (inst.loss(i) - loss);
        for k in 0..m {
            grad[i * m + k] = s * dg[i][k];
        }
    }
    Ok((loss, grad))
}

/// Scales every deviation from the actual configuration by `B / cost` when
/// the budget is exceeded.
fn pull_into_budget(inst: &FdpInstance, x: &mut FeatureConfig) {
    let cost: f64 = (0..inst.n()).map(|i| inst.target_cost(i, x.row(i))).sum();
    if cost > inst.budget() {
        let theta = inst.budget() / cost;
        for i in 0..inst.n() {
            for k in 0..inst.m() {
                let a = inst.actual().get(i, k);
                x.set(i, k, a + theta * (x.get(i, k) - a));
            }
        }
    }
}

/// Projected first-order descent on the expected loss with a quadratic
/// budget penalty. Heuristic: returns a local optimum.
pub fn plan_gradient(instance: &FdpInstance, model: &ScoreModel, hyper: &GradientHyper) -> Result<PlanResult> {
    let start = Instant::now();
    model.check_features(instance.m())?;
    if model.family().is_none() {
        return Err(FdpError::Precondition("plan_gradient needs a differentiable score model".into()));
    }
    if instance.kinds().iter().any(|&k| k != FeatureKind::Continuous) || !instance.constraints().is_empty() {
        return Err(FdpError::Precondition(
            "plan_gradient needs all-continuous features and no linear constraints".into(),
        ));
    }
    let (n, m) = (instance.n(), instance.m());
    let ranges: Vec<(f64, f64)> = (0..n * m).map(|e| instance.entry_range(e / m, e % m)).collect();
    let mut rng = rng_from_seed(hyper.seed);
    let mut best = instance.actual().clone();
    let mut best_loss = crate::instance::expected_loss(instance, model, &best)?;
    let mut steps_done = 0;
    for restart in 0..hyper.restarts.max(1) {
        let mut x = instance.actual().clone();
        if restart > 0 {
            for (e, &(lo, hi)) in ranges.iter().enumerate() {
                x.set(e / m, e % m, if hi > lo { rng.gen_range(lo..=hi) } else { lo });
            }
        }
        let (mut m1, mut m2) = (vec![0.0; n * m], vec![0.0; n * m]);
        for step in 1..=hyper.steps {
            let (_, mut grad) = loss_grad(instance, model, &x)?;
            let cost: f64 = (0..n).map(|i| instance.target_cost(i, x.row(i))).sum();
            let over = cost - instance.budget();
            if over > 0.0 {
                for e in 0..n * m {
                    let (i, k) = (e / m, e % m);
                    let dev = x.get(i, k) - instance.actual().get(i, k);
                    grad[e] += 2.0 * hyper.penalty * over * instance.cost(i, k) * dev.signum();
                }
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(FdpError::Solver(format!("non-finite gradient at step {step}")));
            }
            for e in 0..n * m {
                let g = grad[e];
                let delta = match hyper.optimizer {
                    Optimizer::Adam => {
                        m1[e] = 0.9 * m1[e] + 0.1 * g;
                        m2[e] = 0.999 * m2[e] + 0.001 * g * g;
                        let mh = m1[e] / (1.0 - 0.9f64.powi(step as i32));
                        let vh = m2[e] / (1.0 - 0.999f64.powi(step as i32));
                        hyper.learning_rate * mh / (vh.sqrt() + 1e-8)
                    }
                    Optimizer::RmsProp => {
                        m2[e] = 0.9 * m2[e] + 0.1 * g * g;
                        hyper.learning_rate * g / (m2[e].sqrt() + 1e-8)
                    }
                };
                let (lo, hi) = ranges[e];
                let (i, k) = (e / m, e % m);
                x.set(i, k, (x.get(i, k) - delta).clamp(lo, hi));
            }
            steps_done += 1;
        }
        pull_into_budget(instance, &mut x);
        let loss = crate::instance::expected_loss(instance, model, &x)?;
        if loss < best_loss && crate::planning::is_feasible(instance, &x) {
            best_loss = loss;
            best = x;
        }
    }
    let stats = SolverStats {
        status: "done".into(),
        iterations: steps_done,
        ..Default::default()
    };
    PlanResult::finish(instance, model, "gradient", best, stats.with_time(start.elapsed()))
}
