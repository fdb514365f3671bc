//! Exact planners for two special cases: deception cost only on binary
//! features, and no binding constraints at all.

use std::time::Instant;

use crate::attacker::ScoreModel;
use crate::error::{FdpError, Result};
use crate::instance::{FdpInstance, FeatureConfig, FeatureKind, FEASIBILITY_TOL};
use crate::planning::{classical_weights, PlanResult, SolverStats};
use crate::solver::{solve_milp, BnbOptions, MilpModel, Sense};

/// Largest number of free binary entries enumerated for one target.
const MAX_FREE_BINARIES: usize = 20;

struct Choice {
    row: Vec<f64>,
    cost: f64,
    /// `Σ_{binary k} w_k x_k`
    log_score: f64,
}

/// Binary parts of a target's feasible rows, one per distinct binary score,
/// keeping the cheapest. Continuous entries stay at their actual values.
fn binary_choices(inst: &FdpInstance, w: &[f64], i: usize) -> Result<Vec<Choice>> {
    let m = inst.m();
    let base = inst.actual().row(i).to_vec();
    let free: Vec<usize> = (0..m)
        .filter(|&k| inst.kind(k) == FeatureKind::Binary && inst.entry_range(i, k) == (0.0, 1.0))
        .collect();
    if free.len() > MAX_FREE_BINARIES {
        return Err(FdpError::Precondition(format!(
            "target {i} has {} free binary entries; at most {MAX_FREE_BINARIES} are enumerated",
            free.len()
        )));
    }
    let mut out: Vec<Choice> = Vec::new();
    for mask in 0u64..(1u64 << free.len()) {
        let mut row = base.clone();
        for (bit, &k) in free.iter().enumerate() {
            row[k] = ((mask >> bit) & 1) as f64;
        }
        if inst.constraints_for(i).any(|c| !c.is_satisfied(&row)) {
            continue;
        }
        let log_score = (0..m).filter(|&k| inst.kind(k) == FeatureKind::Binary).map(|k| w[k] * row[k]).sum();
        out.push(Choice {
            cost: inst.target_cost(i, &row),
            row,
            log_score,
        });
    }
    out.sort_by(|a, b| a.log_score.total_cmp(&b.log_score).then(a.cost.total_cmp(&b.cost)));
    out.dedup_by(|later, kept| later.log_score.to_bits() == kept.log_score.to_bits());
    Ok(out)
}

/// Exact planner when continuous features carry no deception cost. Targets
/// pick one binary combination each; continuous parts move freely inside
/// their boxes, so each target's continuous score ranges over an interval
/// and the fractional objective is solved by Dinkelbach iteration over a
/// multiple-choice knapsack.
pub fn plan_exact_discrete_cost(instance: &FdpInstance, weights: &[f64]) -> Result<PlanResult> {
    let start = Instant::now();
    let model = ScoreModel::classical(weights.to_vec());
    classical_weights(&model, instance.m(), "plan_exact_discrete_cost")?;
    let (n, m) = (instance.n(), instance.m());
    for i in 0..n {
        for k in instance.continuous_features() {
            let (lo, hi) = instance.entry_range(i, k);
            if hi > lo && instance.cost(i, k) != 0.0 {
                return Err(FdpError::Precondition(format!(
                    "continuous entry [{i}][{k}] has nonzero deception cost"
                )));
            }
        }
    }
    for (c, con) in instance.constraints().iter().enumerate() {
        if con.terms.iter().any(|&(k, _)| instance.kind(k) == FeatureKind::Continuous) {
            return Err(FdpError::Precondition(format!(
                "constraint {c} involves a continuous feature"
            )));
        }
    }
    let choices: Vec<Vec<Choice>> = (0..n).map(|i| binary_choices(instance, weights, i)).collect::<Result<_>>()?;
    if let Some(i) = choices.iter().position(Vec::is_empty) {
        return Err(FdpError::InvalidInstance(format!("target {i} has no feasible binary combination")));
    }
    // continuous score interval and its extreme rows
    let mut cont_lo = vec![0.0; n];
    let mut cont_hi = vec![0.0; n];
    let mut row_lo = vec![vec![]; n];
    let mut row_hi = vec![vec![]; n];
    for i in 0..n {
        for k in instance.continuous_features() {
            let (lo, hi) = instance.entry_range(i, k);
            let wk = weights[k];
            let (a, b) = if wk >= 0.0 { (lo, hi) } else { (hi, lo) };
            cont_lo[i] += wk * a;
            cont_hi[i] += wk * b;
            row_lo[i].push((k, a));
            row_hi[i].push((k, b));
        }
    }
    let shift = (0..n)
        .flat_map(|i| choices[i].iter().map(|c| c.log_score + cont_hi[i]).collect::<Vec<_>>())
        .fold(f64::NEG_INFINITY, f64::max);
    let score = |i: usize, j: usize, high: bool| {
        (choices[i][j].log_score + if high { cont_hi[i] } else { cont_lo[i] } - shift).exp()
    };
    let ratio = |pick: &[(usize, bool)]| {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &(j, high)) in pick.iter().enumerate() {
            let f = score(i, j, high);
            num += f * instance.loss(i);
            den += f;
        }
        num / den
    };
    // start from the actual binary parts with continuous parts high
    let mut pick: Vec<(usize, bool)> = (0..n)
        .map(|i| {
            let actual = instance.actual().row(i);
            let j = choices[i]
                .iter()
                .position(|c| (0..m).all(|k| instance.kind(k) != FeatureKind::Binary || c.row[k] == actual[k]))
                .unwrap_or(0);
            (j, true)
        })
        .collect();
    if (0..n).map(|i| choices[i][pick[i].0].cost).sum::<f64>() > instance.budget() + FEASIBILITY_TOL {
        return Err(FdpError::Solver("actual binary combination exceeds the budget".into()));
    }
    let mut lambda = ratio(&pick);
    let mut stats = SolverStats::default();
    for _ in 0..200 {
        stats.iterations += 1;
        let value = |i: usize, j: usize| {
            let c = instance.loss(i) - lambda;
            let high = c < 0.0;
            (c * score(i, j, high), high)
        };
        let best_each: Vec<(usize, bool)> = (0..n)
            .map(|i| {
                let j = (0..choices[i].len())
                    .min_by(|&a, &b| value(i, a).0.total_cmp(&value(i, b).0).then(a.cmp(&b)))
                    .unwrap();
                (j, value(i, j).1)
            })
            .collect();
        let cost_of = |p: &[(usize, bool)]| (0..n).map(|i| choices[i][p[i].0].cost).sum::<f64>();
        let next = if cost_of(&best_each) <= instance.budget() + FEASIBILITY_TOL {
            best_each
        } else {
            let mut mm = MilpModel::new();
            let mut vars = Vec::with_capacity(n);
            let mut budget_terms = Vec::new();
            for i in 0..n {
                let ids: Vec<usize> = (0..choices[i].len())
                    .map(|j| {
                        let v = mm.add_binary(format!("y_{i}_{j}"));
                        mm.objective[v] = value(i, j).0;
                        budget_terms.push((v, choices[i][j].cost));
                        v
                    })
                    .collect();
                mm.add_row(format!("one_{i}"), ids.iter().map(|&v| (v, 1.0)).collect(), Sense::Eq, 1.0);
                vars.push(ids);
            }
            mm.add_row("budget", budget_terms, Sense::Le, instance.budget());
            let mut seed = vec![0.0; mm.num_vars()];
            for i in 0..n {
                seed[vars[i][pick[i].0]] = 1.0;
            }
            let sol = solve_milp(&mm, &BnbOptions::default(), &[seed], None)?;
            stats.nodes += sol.nodes;
            stats.lp_iterations += sol.lp_iterations;
            let x = sol.x.ok_or_else(|| FdpError::Solver("knapsack subproblem infeasible".into()))?;
            (0..n)
                .map(|i| {
                    let j = (0..choices[i].len()).find(|&j| x[vars[i][j]] > 0.5).unwrap_or(pick[i].0);
                    (j, value(i, j).1)
                })
                .collect()
        };
        let objective: f64 = next.iter().enumerate().map(|(i, &(j, _))| value(i, j).0).sum();
        let scale: f64 = next.iter().enumerate().map(|(i, &(j, h))| score(i, j, h)).sum();
        if objective >= -1e-12 * scale {
            break;
        }
        pick = next;
        lambda = ratio(&pick);
    }
    let mut config = instance.actual().clone();
    for (i, &(j, high)) in pick.iter().enumerate() {
        config.row_mut(i).copy_from_slice(&choices[i][j].row);
        for &(k, v) in if high { &row_hi[i] } else { &row_lo[i] } {
            config.set(i, k, v);
        }
    }
    stats.status = "optimal".into();
    let mut r = PlanResult::finish(instance, &model, "exact_discrete_cost", config, stats.with_time(start.elapsed()))?;
    r.bound = Some(0.0);
    Ok(r)
}

/// Exact planner without binding constraints: every target shows either the
/// score-maximizing or the score-minimizing row, and the maximizing targets
/// are a prefix of the targets sorted by loss.
pub fn plan_unconstrained(instance: &FdpInstance, weights: &[f64]) -> Result<PlanResult> {
    let start = Instant::now();
    let model = ScoreModel::classical(weights.to_vec());
    classical_weights(&model, instance.m(), "plan_unconstrained")?;
    if !instance.is_unconstrained() {
        return Err(FdpError::Precondition(
            "plan_unconstrained needs full [0, 1] ranges, no linear constraints and a non-binding budget".into(),
        ));
    }
    let n = instance.n();
    let hi_row: Vec<f64> = weights.iter().map(|&w| if w > 0.0 { 1.0 } else { 0.0 }).collect();
    let lo_row: Vec<f64> = weights.iter().map(|&w| if w < 0.0 { 1.0 } else { 0.0 }).collect();
    // low score relative to high score
    let r = (-weights.iter().map(|w| w.abs()).sum::<f64>()).exp();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| instance.loss(a).total_cmp(&instance.loss(b)));
    let total: f64 = instance.losses().iter().sum();
    let (mut prefix, mut best_j, mut best) = (0.0, 0usize, f64::INFINITY);
    for j in 0..=n {
        if j > 0 {
            prefix += instance.loss(order[j - 1]);
        }
        let loss = (prefix + r * (total - prefix)) / (j as f64 + r * (n - j) as f64);
        if loss < best - 1e-15 {
            best = loss;
            best_j = j;
        }
    }
    let mut config = FeatureConfig::zeros(n, instance.m());
    for (pos, &i) in order.iter().enumerate() {
        config.row_mut(i).copy_from_slice(if pos < best_j { &hi_row } else { &lo_row });
    }
    let stats = SolverStats {
        status: "optimal".into(),
        iterations: n + 1,
        ..Default::default()
    };
    let mut res = PlanResult::finish(instance, &model, "unconstrained", config, stats.with_time(start.elapsed()))?;
    res.bound = Some(0.0);
    Ok(res)
}
