//! Exhaustive enumeration oracle.

use std::time::Instant;

use crate::attacker::ScoreModel;
use crate::error::{FdpError, Result};
use crate::instance::{loss_from_distribution, EntryDomain, FdpInstance, BinaryDomain, FEASIBILITY_TOL};
use crate::planning::{PlanResult, SolverStats};

pub const DEFAULT_GRID_STEP: f64 = 0.25;
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Clone, Debug)]
pub struct BruteForceOptions {
    pub grid_step: f64,
    /// Maximum number of enumerated complete configurations.
    pub cap: u128,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self {
            grid_step: DEFAULT_GRID_STEP,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

struct Option_ {
    row: Vec<f64>,
    cost: f64,
    key: f64,
}

fn entry_values(inst: &FdpInstance, i: usize, k: usize, step: f64) -> Vec<f64> {
    let x = inst.actual().get(i, k);
    match inst.domain(i, k) {
        EntryDomain::Binary(BinaryDomain::Fixed) => vec![x],
        EntryDomain::Binary(BinaryDomain::Free) => vec![0.0, 1.0],
        EntryDomain::Radius(_) => {
            let (lo, hi) = inst.entry_range(i, k);
            let mut v = vec![lo, hi, x];
            let mut g = (lo / step).ceil() * step;
            while g <= hi + 1e-12 {
                v.push(g.min(hi));
                g += step;
            }
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            v
        }
    }
}

/// Rows of target `i` worth enumerating: every grid combination that meets
/// the target's constraints, reduced to the cheapest row per distinct score.
fn target_options(inst: &FdpInstance, model: &ScoreModel, i: usize, step: f64, cap: u128) -> Result<Vec<Option_>> {
    let m = inst.m();
    let values: Vec<Vec<f64>> = (0..m).map(|k| entry_values(inst, i, k, step)).collect();
    let size: u128 = values.iter().map(|v| v.len() as u128).product();
    if size > cap {
        return Err(FdpError::EnumerationCap { size, cap });
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; m];
    let mut row: Vec<f64> = values.iter().map(|v| v[0]).collect();
    loop {
        if inst.constraints_for(i).all(|c| c.is_satisfied(&row)) {
            out.push(Option_ {
                cost: inst.target_cost(i, &row),
                key: model.log_score(&row),
                row: row.clone(),
            });
        }
        let mut k = 0;
        loop {
            if k == m {
                out.sort_by(|a, b| a.key.total_cmp(&b.key).then(a.cost.total_cmp(&b.cost)));
                out.dedup_by(|later, kept| later.key.to_bits() == kept.key.to_bits());
                out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.key.total_cmp(&b.key)));
                return Ok(out);
            }
            idx[k] += 1;
            if idx[k] < values[k].len() {
                row[k] = values[k][idx[k]];
                break;
            }
            idx[k] = 0;
            row[k] = values[k][0];
            k += 1;
        }
    }
}

struct Search<'a> {
    inst: &'a FdpInstance,
    model: &'a ScoreModel,
    options: Vec<Vec<Option_>>,
    suffix_min: Vec<f64>,
    keys: Vec<f64>,
    pick: Vec<usize>,
    best: f64,
    best_pick: Vec<usize>,
    leaves: u128,
    cap: u128,
}

impl Search<'_> {
    fn leaf_loss(&self) -> f64 {
        let p = match self.model {
            ScoreModel::RequirementRule { .. } => {
                let top = self.keys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let winners = self.keys.iter().filter(|&&k| k == top).count() as f64;
                self.keys.iter().map(|&k| if k == top { 1.0 / winners } else { 0.0 }).collect::<Vec<_>>()
            }
            _ => crate::attacker::softmax(&self.keys),
        };
        loss_from_distribution(&p, self.inst.losses())
    }

    fn dfs(&mut self, i: usize, spent: f64) -> Result<()> {
        if i == self.options.len() {
            self.leaves += 1;
            if self.leaves > self.cap {
                return Err(FdpError::EnumerationCap {
                    size: self.leaves,
                    cap: self.cap,
                });
            }
            let loss = self.leaf_loss();
            if loss < self.best {
                self.best = loss;
                self.best_pick = self.pick.clone();
            }
            return Ok(());
        }
        let budget = self.inst.budget() + FEASIBILITY_TOL;
        for j in 0..self.options[i].len() {
            let c = self.options[i][j].cost;
            if spent + c + self.suffix_min[i + 1] > budget {
                // options are sorted by cost
                break;
            }
            self.keys[i] = self.options[i][j].key;
            self.pick[i] = j;
            self.dfs(i + 1, spent + c)?;
        }
        Ok(())
    }
}

/// Exact minimizer over all binary values and grid-discretized continuous
/// values. Fails when more than `cap` complete configurations would be
/// enumerated.
pub fn brute_force_plan(instance: &FdpInstance, model: &ScoreModel, opts: &BruteForceOptions) -> Result<PlanResult> {
    let start = Instant::now();
    model.check_features(instance.m())?;
    if !(opts.grid_step > 0.0) {
        return Err(FdpError::OutOfRange {
            name: "grid_step",
            value: opts.grid_step,
            expected: "positive",
        });
    }
    let n = instance.n();
    let options: Vec<Vec<Option_>> = (0..n)
        .map(|i| target_options(instance, model, i, opts.grid_step, opts.cap))
        .collect::<Result<_>>()?;
    let mut suffix_min = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let cheapest = options[i].iter().map(|o| o.cost).fold(f64::INFINITY, f64::min);
        suffix_min[i] = suffix_min[i + 1] + cheapest;
    }
    let mut search = Search {
        inst: instance,
        model,
        options,
        suffix_min,
        keys: vec![0.0; n],
        pick: vec![0; n],
        best: f64::INFINITY,
        best_pick: Vec::new(),
        leaves: 0,
        cap: opts.cap,
    };
    search.dfs(0, 0.0)?;
    if search.best_pick.is_empty() {
        return Err(FdpError::Solver("enumeration found no feasible configuration".into()));
    }
    let mut config = instance.actual().clone();
    for (i, &j) in search.best_pick.iter().enumerate() {
        config.row_mut(i).copy_from_slice(&search.options[i][j].row);
    }
    let stats = SolverStats {
        status: "optimal".into(),
        iterations: search.leaves as usize,
        ..Default::default()
    };
    let mut r = PlanResult::finish(instance, model, "brute_force", config, stats.with_time(start.elapsed()))?;
    r.bound = Some(0.0);
    Ok(r)
}
