//! MILP model container, LP-format writer and best-first branch-and-bound
//! over binary/integer variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::{FdpError, Result};
use crate::solver::lp::{self, LinearProgram, LpStatus, Row, Sense};

#[derive(Clone, Debug, Default)]
pub struct MilpModel {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    /// Minimized.
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub row_names: Vec<String>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, integer: bool) -> usize {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(integer);
        self.objective.push(0.0);
        self.names.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, 0.0, 1.0, true)
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row { terms, sense, rhs });
        self.row_names.push(name.into());
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound, row or integrality violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
            if self.integer[j] {
                worst = worst.max((x[j] - x[j].round()).abs());
            }
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Writes the model in CPLEX LP text format.
    pub fn write_lp<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let name = |j: usize| sanitize(&self.names[j], 'x', j);
        let expr = |terms: &[(usize, f64)]| -> String {
            if terms.is_empty() {
                // LP files need at least one variable in every expression
                return if self.names.is_empty() { "0".into() } else { format!("0 {}", name(0)) };
            }
            let mut s = String::new();
            for (idx, &(j, a)) in terms.iter().enumerate() {
                let sign = if a < 0.0 { "-" } else if idx > 0 { "+" } else { "" };
                // keep lines short for readers with a line-length limit
                if idx > 0 && idx % 4 == 0 {
                    s.push_str("\n   ");
                }
                s.push_str(&format!("{sign} {:.17e} {} ", a.abs(), name(j)));
            }
            s.trim_end().to_string()
        };
        writeln!(w, "\\ feature deception MILP")?;
        writeln!(w, "Minimize")?;
        let obj: Vec<(usize, f64)> =
            self.objective.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(j, &c)| (j, c)).collect();
        writeln!(w, " obj: {}", expr(&obj))?;
        writeln!(w, "Subject To")?;
        for (r, row) in self.rows.iter().enumerate() {
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(w, " {}: {} {op} {:.17e}", sanitize(&self.row_names[r], 'c', r), expr(&row.terms), row.rhs)?;
        }
        writeln!(w, "Bounds")?;
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            if u.is_infinite() {
                writeln!(w, " {} >= {:.17e}", name(j), l)?;
            } else {
                writeln!(w, " {:.17e} <= {} <= {:.17e}", l, name(j), u)?;
            }
        }
        let ints: Vec<String> = (0..self.num_vars()).filter(|&j| self.integer[j]).map(name).collect();
        if !ints.is_empty() {
            writeln!(w, "Generals")?;
            for chunk in ints.chunks(8) {
                writeln!(w, " {}", chunk.join(" "))?;
            }
        }
        writeln!(w, "End")
    }
}

fn sanitize(raw: &str, prefix: char, idx: usize) -> String {
    let cleaned: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    match cleaned.chars().next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => cleaned,
        _ => format!("{prefix}{idx}_{cleaned}"),
    }
}

#[derive(Clone, Debug)]
pub struct BnbOptions {
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub int_tol: f64,
    /// Nodes whose bound is within this of the incumbent are pruned.
    pub abs_gap: f64,
    /// Stop as soon as an incumbent with objective ≤ this is found.
    pub stop_at: Option<f64>,
    /// Prune nodes whose relaxation bound exceeds this value.
    pub cutoff: Option<f64>,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            node_limit: 1_000_000,
            time_limit: None,
            int_tol: 1e-6,
            abs_gap: 1e-9,
            stop_at: None,
            cutoff: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    /// Stopped because an incumbent met `stop_at`.
    Target,
    /// All nodes were pruned by `cutoff` or infeasible.
    Infeasible,
    /// Node or time limit reached.
    Limit,
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    /// Lower bound on the optimum (for the nodes that were not cut off).
    pub bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub elapsed: Duration,
}

/// Maps a relaxation solution to a candidate integer point (or nothing).
pub type Heuristic<'a> = dyn Fn(&[f64]) -> Option<Vec<f64>> + 'a;

struct Node {
    bound: f64,
    seq: usize,
    fixings: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smaller bound first, then newer node first
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(self.seq.cmp(&other.seq))
    }
}

struct Relaxation {
    status: LpStatus,
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
}

/// Solves the LP relaxation with the node's bound changes applied; fixed
/// variables are substituted out.
fn solve_node(model: &MilpModel, fixings: &[(usize, f64, f64)]) -> Result<Relaxation> {
    let nv = model.num_vars();
    let mut lo = model.lower.clone();
    let mut hi = model.upper.clone();
    for &(j, l, u) in fixings {
        lo[j] = lo[j].max(l);
        hi[j] = hi[j].min(u);
    }
    let mut map = vec![usize::MAX; nv];
    let mut free = Vec::new();
    for j in 0..nv {
        if hi[j] < lo[j] - 1e-12 {
            return Ok(Relaxation {
                status: LpStatus::Infeasible,
                x: vec![],
                objective: f64::INFINITY,
                iterations: 0,
            });
        }
        if hi[j] - lo[j] > 1e-12 {
            map[j] = free.len();
            free.push(j);
        }
    }
    let mut rows = Vec::with_capacity(model.rows.len());
    for row in &model.rows {
        let mut rhs = row.rhs;
        let mut terms = Vec::with_capacity(row.terms.len());
        for &(j, a) in &row.terms {
            if map[j] == usize::MAX {
                rhs -= a * lo[j];
            } else {
                terms.push((map[j], a));
            }
        }
        if terms.is_empty() {
            let tol = 1e-9 * (1.0 + rhs.abs());
            let ok = match row.sense {
                Sense::Le => 0.0 <= rhs + tol,
                Sense::Ge => 0.0 >= rhs - tol,
                Sense::Eq => rhs.abs() <= tol,
            };
            if !ok {
                return Ok(Relaxation {
                    status: LpStatus::Infeasible,
                    x: vec![],
                    objective: f64::INFINITY,
                    iterations: 0,
                });
            }
            continue;
        }
        rows.push(Row {
            terms,
            sense: row.sense,
            rhs,
        });
    }
    let sub = LinearProgram {
        objective: free.iter().map(|&j| model.objective[j]).collect(),
        rows,
        lower: free.iter().map(|&j| lo[j]).collect(),
        upper: free.iter().map(|&j| hi[j]).collect(),
    };
    let sol = lp::solve(&sub)?;
    let mut x = lo;
    for (idx, &j) in free.iter().enumerate() {
        x[j] = sol.x[idx];
    }
    let objective = if sol.status == LpStatus::Optimal {
        model.objective_value(&x)
    } else {
        f64::INFINITY
    };
    Ok(Relaxation {
        status: sol.status,
        x,
        objective,
        iterations: sol.iterations,
    })
}

/// Best-first branch-and-bound. `initial` candidates and heuristic outputs
/// are accepted as incumbents only if they satisfy the model within `1e-6`.
pub fn solve_milp(
    model: &MilpModel,
    opts: &BnbOptions,
    initial: &[Vec<f64>],
    heuristic: Option<&Heuristic<'_>>,
) -> Result<MilpSolution> {
    let start = Instant::now();
    let mut incumbent: Option<Vec<f64>> = None;
    let mut best = f64::INFINITY;
    let accept = |x: &[f64], best: &mut f64, inc: &mut Option<Vec<f64>>| {
        if x.len() == model.num_vars() && model.max_violation(x) <= 1e-6 {
            let v = model.objective_value(x);
            if v < *best {
                *best = v;
                *inc = Some(x.to_vec());
            }
        }
    };
    for cand in initial {
        accept(cand, &mut best, &mut incumbent);
    }
    let done = |best: f64| opts.stop_at.is_some_and(|s| best <= s);
    let finish = |status, x: Option<Vec<f64>>, best: f64, bound: f64, nodes, iters| MilpSolution {
        status,
        x,
        objective: best,
        bound,
        nodes,
        lp_iterations: iters,
        elapsed: start.elapsed(),
    };
    if done(best) {
        return Ok(finish(MilpStatus::Target, incumbent, best, f64::NEG_INFINITY, 0, 0));
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        fixings: Vec::new(),
    });
    let mut seq = 1;
    let (mut nodes, mut iters) = (0usize, 0usize);
    let prune = |bound: f64, best: f64| bound >= best - opts.abs_gap || opts.cutoff.is_some_and(|c| bound > c);

    while let Some(node) = heap.pop() {
        if prune(node.bound, best) {
            continue;
        }
        let out_of_time = opts.time_limit.is_some_and(|t| start.elapsed() > t);
        if nodes >= opts.node_limit || out_of_time {
            let bound = node.bound.min(heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min));
            return Ok(finish(MilpStatus::Limit, incumbent, best, bound.min(best), nodes, iters));
        }
        nodes += 1;
        let relax = solve_node(model, &node.fixings)?;
        iters += relax.iterations;
        match relax.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Err(FdpError::Solver("MILP relaxation is unbounded".into())),
            LpStatus::Optimal => {}
        }
        if prune(relax.objective, best) {
            continue;
        }
        // most fractional integer variable, lowest index on ties
        let mut branch = None;
        let mut frac_best = opts.int_tol;
        for j in 0..model.num_vars() {
            if !model.integer[j] {
                continue;
            }
            let v = relax.x[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > frac_best + 1e-12 {
                frac_best = frac;
                branch = Some(j);
            }
        }
        let Some(j) = branch else {
            let mut x = relax.x.clone();
            for (k, v) in x.iter_mut().enumerate() {
                if model.integer[k] {
                    *v = v.round();
                }
            }
            if relax.objective < best {
                best = relax.objective;
                incumbent = Some(if model.max_violation(&x) <= 1e-6 { x } else { relax.x.clone() });
            }
            if done(best) {
                return Ok(finish(MilpStatus::Target, incumbent, best, f64::NEG_INFINITY, nodes, iters));
            }
            continue;
        };
        if let Some(h) = heuristic {
            if let Some(cand) = h(&relax.x) {
                accept(&cand, &mut best, &mut incumbent);
                if done(best) {
                    return Ok(finish(MilpStatus::Target, incumbent, best, f64::NEG_INFINITY, nodes, iters));
                }
            }
        }
        let v = relax.x[j];
        let mut down = node.fixings.clone();
        down.push((j, f64::NEG_INFINITY, v.floor()));
        let mut up = node.fixings;
        up.push((j, v.ceil(), f64::INFINITY));
        heap.push(Node {
            bound: relax.objective,
            seq,
            fixings: down,
        });
        heap.push(Node {
            bound: relax.objective,
            seq: seq + 1,
            fixings: up,
        });
        seq += 2;
    }
    let status = if incumbent.is_some() {
        MilpStatus::Optimal
    } else {
        MilpStatus::Infeasible
    };
    Ok(finish(status, incumbent, best, best, nodes, iters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_knapsack() {
        // max 10a + 13b + 7c, 4a + 6b + 3c <= 9 -> a + c (17) vs b + c (20)
        let mut m = MilpModel::new();
        let vals = [10.0, 13.0, 7.0];
        let wts = [4.0, 6.0, 3.0];
        let vars: Vec<usize> = (0..3).map(|i| m.add_binary(format!("y{i}"))).collect();
        for (i, &v) in vars.iter().enumerate() {
            m.objective[v] = -vals[i];
        }
        m.add_row("cap", vars.iter().zip(wts).map(|(&v, w)| (v, w)).collect(), Sense::Le, 9.0);
        let s = solve_milp(&m, &BnbOptions::default(), &[], None).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.objective + 20.0).abs() < 1e-9);
        let x = s.x.unwrap();
        assert_eq!((x[0].round(), x[1].round(), x[2].round()), (0.0, 1.0, 1.0));
    }

    #[test]
    fn infeasible_model() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_row("r", vec![(a, 1.0), (b, 1.0)], Sense::Eq, 1.5);
        let s = solve_milp(&m, &BnbOptions::default(), &[], None).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
    }

    #[test]
    fn lp_format_has_sections() {
        let mut m = MilpModel::new();
        let a = m.add_binary("y[0]");
        let t = m.add_var("t 1", 0.0, f64::INFINITY, false);
        m.objective[t] = 1.0;
        m.add_row("link", vec![(a, 1.0), (t, -2.0)], Sense::Le, 0.0);
        let mut out = Vec::new();
        m.write_lp(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        for s in ["Minimize", "Subject To", "Bounds", "Generals", "End", "t_1 >= "] {
            assert!(text.contains(s), "missing {s} in\n{text}");
        }
    }
}
