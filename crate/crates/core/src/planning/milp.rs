//! MILP planners over the piecewise-linear score approximation.
//!
//! Two formulations share the same ingredients: feature variables, the
//! deception budget, per-target linear constraints, and per-target segment
//! fills `z_il` linked to the normalized exponent `w·x_i − W`, with ordering
//! binaries `y_il` where fill order is not implied by the objective.
//!
//! - the binary-search model minimizes `Σ_i (u_i − δ) f̂_i`, which is linear;
//! - the fractional model applies the Charnes-Cooper scaling `v = 1/Σ f̂_i u_i`
//!   and maximizes `Σ_i f̂_i v`, linearizing products of binaries and `v`
//!   with bounds on `v`.

use std::time::{Duration, Instant};

use crate::attacker::ScoreModel;
use crate::error::{FdpError, Result};
use crate::instance::{FdpInstance, FeatureConfig, FeatureKind};
use crate::planning::pwl::PiecewiseExpApprox;
use crate::planning::{classical_weights, is_feasible, plan_greedy, PlanResult, SolverStats};
use crate::solver::{solve_milp, BnbOptions, MilpModel, MilpStatus, Sense};

const SEG_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct MilpOptions {
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            node_limit: 500_000,
            time_limit: None,
        }
    }
}

impl MilpOptions {
    fn bnb(&self) -> BnbOptions {
        BnbOptions {
            node_limit: self.node_limit,
            time_limit: self.time_limit,
            ..BnbOptions::default()
        }
    }
}

/// Per-target segment window: segments `< first` are always full, segments
/// `>= end` always empty.
#[derive(Clone, Copy, Debug)]
struct Window {
    first: usize,
    end: usize,
}

struct Common<'a> {
    inst: &'a FdpInstance,
    w: &'a [f64],
    w_l1: f64,
    pwl: PiecewiseExpApprox,
    windows: Vec<Window>,
}

impl<'a> Common<'a> {
    fn new(inst: &'a FdpInstance, w: &'a [f64], epsilon: f64) -> Result<Self> {
        let w_l1: f64 = w.iter().map(|v| v.abs()).sum();
        let pwl = PiecewiseExpApprox::new(w_l1, epsilon)?;
        let starts: Vec<f64> = (0..=pwl.segments()).map(|l| pwl.segment_start(l)).collect();
        let windows = (0..inst.n())
            .map(|i| {
                let (mut gmin, mut gmax) = (0.0, 0.0);
                for (k, &wk) in w.iter().enumerate() {
                    let (lo, hi) = inst.entry_range(i, k);
                    gmin += f64::min(wk * lo, wk * hi);
                    gmax += f64::max(wk * lo, wk * hi);
                }
                let (dmin, dmax) = (w_l1 - gmax, w_l1 - gmin);
                let first = (0..pwl.segments()).take_while(|&l| starts[l + 1] <= dmin + SEG_TOL).count();
                let end = (0..pwl.segments())
                    .find(|&l| starts[l] >= dmax - SEG_TOL)
                    .unwrap_or(pwl.segments())
                    .max(first);
                Window { first, end }
            })
            .collect();
        Ok(Self {
            inst,
            w,
            w_l1,
            pwl,
            windows,
        })
    }

    fn depth(&self, row: &[f64]) -> f64 {
        self.w_l1 - self.w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
    }

    /// In-order fill with the ordering indicators it implies.
    fn fill_with_flags(&self, row: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let mut z = self.pwl.fill(self.depth(row));
        let segs = z.len();
        let mut full = vec![false; segs];
        for l in 0..segs {
            let next = l + 1 < segs && z[l + 1] > 0.0;
            if next || z[l] >= self.pwl.lengths[l] * (1.0 - 1e-12) {
                full[l] = true;
                z[l] = self.pwl.lengths[l];
            }
        }
        (z, full)
    }

    fn approx_score(&self, row: &[f64]) -> f64 {
        self.pwl.value_from_fill(&self.fill_with_flags(row).0)
    }

    /// Surrogate expected loss `Σ f̂ u / Σ f̂`.
    fn surrogate_loss(&self, config: &FeatureConfig) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.inst.n() {
            let f = self.approx_score(config.row(i));
            num += f * self.inst.loss(i);
            den += f;
        }
        num / den
    }

    /// `floor + Σ_{l ≥ first} γ_l len_l`: approximant value with every
    /// window segment empty.
    fn score_offset(&self, i: usize) -> f64 {
        let first = self.windows[i].first;
        self.pwl.floor_value()
            + self.pwl.slopes[first..]
                .iter()
                .zip(&self.pwl.lengths[first..])
                .map(|(g, l)| g * l)
                .sum::<f64>()
    }

    fn is_free(&self, i: usize, k: usize) -> bool {
        let (lo, hi) = self.inst.entry_range(i, k);
        hi - lo > 1e-12
    }

    /// Rounds binaries, clamps continuous entries and repairs constraint or
    /// budget violations by reverting whole targets to their actual rows.
    fn repair(&self, mut config: FeatureConfig) -> Option<FeatureConfig> {
        let inst = self.inst;
        let actual = inst.actual();
        for i in 0..inst.n() {
            for k in 0..inst.m() {
                let (lo, hi) = inst.entry_range(i, k);
                let v = config.get(i, k);
                let v = match inst.kind(k) {
                    FeatureKind::Binary => {
                        if lo == hi {
                            lo
                        } else if v >= 0.5 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    FeatureKind::Continuous => v.clamp(lo, hi),
                };
                config.set(i, k, v);
            }
            if inst.constraints_for(i).any(|c| !c.is_satisfied(config.row(i))) {
                config.row_mut(i).copy_from_slice(actual.row(i));
            }
        }
        let mut cost: Vec<f64> = (0..inst.n()).map(|i| inst.target_cost(i, config.row(i))).collect();
        while cost.iter().sum::<f64>() > inst.budget() + crate::instance::FEASIBILITY_TOL {
            let (i, &c) = cost.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
            if c <= 0.0 {
                return None;
            }
            config.row_mut(i).copy_from_slice(actual.row(i));
            cost[i] = 0.0;
        }
        is_feasible(inst, &config).then_some(config)
    }
}

/// Variable handles for one entry of the configuration.
#[derive(Clone, Copy, Debug)]
enum EntryVar {
    Fixed(f64),
    Binary(usize),
    Continuous(usize),
}

fn budget_binding(inst: &FdpInstance) -> bool {
    inst.max_total_cost() > inst.budget() + crate::instance::FEASIBILITY_TOL
}

// ---------------------------------------------------------------------------
// binary-search formulation

/// The linear model `min Σ_i coef_i f̂_i` plus handles to encode and decode.
pub struct BsModel<'a> {
    common: Common<'a>,
    pub model: MilpModel,
    /// Objective constant: `Σ_i coef_i · score_offset_i`.
    pub constant: f64,
    entries: Vec<EntryVar>,
    dev: Vec<Option<usize>>,
    z: Vec<Vec<Option<usize>>>,
    y: Vec<Vec<Option<usize>>>,
}

/// Builds the binary-search subproblem for threshold `delta`.
pub fn build_bs_model<'a>(inst: &'a FdpInstance, w: &'a [f64], epsilon: f64, delta: f64) -> Result<BsModel<'a>> {
    let coef: Vec<f64> = inst.losses().iter().map(|u| u - delta).collect();
    build_bs_model_coef(Common::new(inst, w, epsilon)?, &coef)
}

fn build_bs_model_coef<'a>(common: Common<'a>, coef: &[f64]) -> Result<BsModel<'a>> {
    let inst = common.inst;
    let (n, m) = (inst.n(), inst.m());
    let mut model = MilpModel::new();
    let mut entries = Vec::with_capacity(n * m);
    let mut dev = vec![None; n * m];
    for i in 0..n {
        for k in 0..m {
            let (lo, hi) = inst.entry_range(i, k);
            let e = if !common.is_free(i, k) {
                EntryVar::Fixed(inst.actual().get(i, k).clamp(lo, hi))
            } else if inst.kind(k) == FeatureKind::Binary {
                EntryVar::Binary(model.add_binary(format!("d_{i}_{k}")))
            } else {
                EntryVar::Continuous(model.add_var(format!("x_{i}_{k}"), lo, hi, false))
            };
            entries.push(e);
        }
    }
    if budget_binding(inst) {
        let mut terms = Vec::new();
        let mut rhs = inst.budget();
        for i in 0..n {
            for k in 0..m {
                let eta = inst.cost(i, k);
                let xhat = inst.actual().get(i, k);
                match entries[i * m + k] {
                    EntryVar::Fixed(_) => {}
                    EntryVar::Binary(v) => {
                        if xhat == 0.0 {
                            terms.push((v, eta));
                        } else {
                            terms.push((v, -eta));
                            rhs -= eta;
                        }
                    }
                    EntryVar::Continuous(v) if eta > 0.0 => {
                        let (lo, hi) = inst.entry_range(i, k);
                        let d = model.add_var(format!("h_{i}_{k}"), 0.0, (hi - xhat).max(xhat - lo), false);
                        model.add_row(format!("habove_{i}_{k}"), vec![(d, 1.0), (v, -1.0)], Sense::Ge, -xhat);
                        model.add_row(format!("hbelow_{i}_{k}"), vec![(d, 1.0), (v, 1.0)], Sense::Ge, xhat);
                        dev[i * m + k] = Some(d);
                        terms.push((d, eta));
                    }
                    EntryVar::Continuous(_) => {}
                }
            }
        }
        model.add_row("budget", terms, Sense::Le, rhs);
    }
    for (c, con) in inst.constraints().iter().enumerate() {
        let i = con.target;
        let mut terms = Vec::new();
        let mut rhs = con.rhs;
        for &(k, a) in &con.terms {
            match entries[i * m + k] {
                EntryVar::Fixed(x) => rhs -= a * x,
                EntryVar::Binary(v) | EntryVar::Continuous(v) => terms.push((v, a)),
            }
        }
        let sense = match con.relation {
            crate::instance::Relation::Eq => Sense::Eq,
            crate::instance::Relation::Leq => Sense::Le,
        };
        model.add_row(format!("lin_{c}"), terms, sense, rhs);
    }
    let pwl = &common.pwl;
    let mut z = vec![Vec::new(); n];
    let mut y = vec![Vec::new(); n];
    let mut constant = 0.0;
    for i in 0..n {
        let win = common.windows[i];
        constant += coef[i] * common.score_offset(i);
        z[i] = vec![None; pwl.segments()];
        y[i] = vec![None; pwl.segments()];
        if pwl.segments() == 0 {
            continue;
        }
        for l in win.first..win.end {
            let v = model.add_var(format!("z_{i}_{l}"), 0.0, pwl.lengths[l], false);
            model.objective[v] = -coef[i] * pwl.slopes[l];
            z[i][l] = Some(v);
        }
        let mut terms: Vec<(usize, f64)> = (win.first..win.end).map(|l| (z[i][l].unwrap(), 1.0)).collect();
        let mut rhs = common.w_l1 - pwl.segment_start(win.first);
        for k in 0..m {
            match entries[i * m + k] {
                EntryVar::Fixed(x) => rhs -= common.w[k] * x,
                EntryVar::Binary(v) | EntryVar::Continuous(v) => {
                    if common.w[k] != 0.0 {
                        terms.push((v, common.w[k]));
                    }
                }
            }
        }
        model.add_row(format!("link_{i}"), terms, Sense::Eq, rhs);
        // with a nonnegative coefficient the minimizer fills steep segments first
        if coef[i] < 0.0 {
            for l in win.first..win.end.saturating_sub(1) {
                let yv = model.add_binary(format!("y_{i}_{l}"));
                let (zl, zn) = (z[i][l].unwrap(), z[i][l + 1].unwrap());
                model.add_row(format!("full_{i}_{l}"), vec![(yv, pwl.lengths[l]), (zl, -1.0)], Sense::Le, 0.0);
                model.add_row(format!("next_{i}_{l}"), vec![(zn, 1.0), (yv, -pwl.lengths[l + 1])], Sense::Le, 0.0);
                y[i][l] = Some(yv);
            }
        }
    }
    Ok(BsModel {
        common,
        model,
        constant,
        entries,
        dev,
        z,
        y,
    })
}

impl<'a> BsModel<'a> {
    pub fn encode(&self, config: &FeatureConfig) -> Vec<f64> {
        let inst = self.common.inst;
        let m = inst.m();
        let mut x = vec![0.0; self.model.num_vars()];
        for i in 0..inst.n() {
            for k in 0..m {
                match self.entries[i * m + k] {
                    EntryVar::Fixed(_) => {}
                    EntryVar::Binary(v) | EntryVar::Continuous(v) => x[v] = config.get(i, k),
                }
                if let Some(d) = self.dev[i * m + k] {
                    x[d] = (config.get(i, k) - inst.actual().get(i, k)).abs();
                }
            }
            let (fill, full) = self.common.fill_with_flags(config.row(i));
            for (l, zv) in self.z[i].iter().enumerate() {
                if let Some(v) = zv {
                    x[*v] = fill[l];
                }
                if let Some(yv) = self.y[i][l] {
                    x[yv] = if full[l] { 1.0 } else { 0.0 };
                }
            }
        }
        x
    }

    pub fn decode(&self, x: &[f64]) -> FeatureConfig {
        let inst = self.common.inst;
        let m = inst.m();
        let mut config = inst.actual().clone();
        for i in 0..inst.n() {
            for k in 0..m {
                let v = match self.entries[i * m + k] {
                    EntryVar::Fixed(v) => v,
                    EntryVar::Binary(v) => x[v].round(),
                    EntryVar::Continuous(v) => x[v],
                };
                config.set(i, k, v);
            }
        }
        config
    }

    fn repaired_candidate(&self, lp_x: &[f64]) -> Option<Vec<f64>> {
        self.common.repair(self.decode(lp_x)).map(|c| self.encode(&c))
    }
}

// ---------------------------------------------------------------------------
// fractional (Charnes-Cooper) formulation

pub struct FractionalModel<'a> {
    common: Common<'a>,
    pub model: MilpModel,
    v: usize,
    /// Binary indicator and scaled copy for free binary entries; scaled copy
    /// for continuous entries.
    entries: Vec<(EntryVar, Option<usize>)>,
    dev: Vec<Option<usize>>,
    s: Vec<Vec<Option<usize>>>,
    y: Vec<Vec<Option<(usize, usize)>>>,
}

/// Builds the scaled model. Requires nonnegative losses with a positive sum.
pub fn build_fractional_model<'a>(inst: &'a FdpInstance, w: &'a [f64], epsilon: f64) -> Result<FractionalModel<'a>> {
    if inst.losses().iter().any(|&u| u < 0.0) || inst.losses().iter().sum::<f64>() <= 0.0 {
        return Err(FdpError::Precondition(
            "the fractional MILP needs nonnegative losses with a positive sum".into(),
        ));
    }
    let common = Common::new(inst, w, epsilon)?;
    let (n, m) = (inst.n(), inst.m());
    let pwl = &common.pwl;
    // bounds on v = 1 / Σ f̂_i u_i from per-target score ranges
    let (mut den_lo, mut den_hi) = (0.0, 0.0);
    for i in 0..n {
        let win = common.windows[i];
        let lowest = pwl.floor_value()
            + pwl.slopes[win.end..].iter().zip(&pwl.lengths[win.end..]).map(|(g, l)| g * l).sum::<f64>();
        den_lo += inst.loss(i) * lowest;
        den_hi += inst.loss(i) * common.score_offset(i);
    }
    let (v_lo, v_hi) = (1.0 / den_hi, 1.0 / den_lo);
    let mut model = MilpModel::new();
    let v = model.add_var("v", v_lo, v_hi, false);

    // scaled product p = bin · v with McCormick rows
    let product = |model: &mut MilpModel, name: String, bin: usize| -> usize {
        let p = model.add_var(name.clone(), 0.0, v_hi, false);
        model.add_row(format!("{name}_ub1"), vec![(p, 1.0), (bin, -v_hi)], Sense::Le, 0.0);
        model.add_row(format!("{name}_lb1"), vec![(p, 1.0), (bin, -v_lo)], Sense::Ge, 0.0);
        model.add_row(format!("{name}_ub2"), vec![(p, 1.0), (v, -1.0), (bin, -v_lo)], Sense::Le, -v_lo);
        model.add_row(format!("{name}_lb2"), vec![(p, 1.0), (v, -1.0), (bin, -v_hi)], Sense::Ge, -v_hi);
        p
    };

    let mut entries = Vec::with_capacity(n * m);
    let mut dev = vec![None; n * m];
    // scaled expression of entry (i, k): (var, coef) list
    let mut scaled: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n * m);
    for i in 0..n {
        for k in 0..m {
            let (lo, hi) = inst.entry_range(i, k);
            if !common.is_free(i, k) {
                let x = inst.actual().get(i, k).clamp(lo, hi);
                entries.push((EntryVar::Fixed(x), None));
                scaled.push(vec![(v, x)]);
            } else if inst.kind(k) == FeatureKind::Binary {
                let d = model.add_binary(format!("d_{i}_{k}"));
                let b = product(&mut model, format!("b_{i}_{k}"), d);
                entries.push((EntryVar::Binary(d), Some(b)));
                scaled.push(vec![(b, 1.0)]);
            } else {
                let q = model.add_var(format!("q_{i}_{k}"), 0.0, hi * v_hi, false);
                model.add_row(format!("qlo_{i}_{k}"), vec![(q, 1.0), (v, -lo)], Sense::Ge, 0.0);
                model.add_row(format!("qhi_{i}_{k}"), vec![(q, 1.0), (v, -hi)], Sense::Le, 0.0);
                entries.push((EntryVar::Continuous(q), Some(q)));
                scaled.push(vec![(q, 1.0)]);
            }
        }
    }
    if budget_binding(inst) {
        let mut terms = vec![(v, -inst.budget())];
        for i in 0..n {
            for k in 0..m {
                let eta = inst.cost(i, k);
                let xhat = inst.actual().get(i, k);
                match entries[i * m + k] {
                    (EntryVar::Binary(_), Some(b)) => {
                        if xhat == 0.0 {
                            terms.push((b, eta));
                        } else {
                            terms.push((b, -eta));
                            terms.push((v, eta));
                        }
                    }
                    (EntryVar::Continuous(_), Some(q)) if eta > 0.0 => {
                        let (lo, hi) = inst.entry_range(i, k);
                        let h = model.add_var(format!("h_{i}_{k}"), 0.0, (hi - xhat).max(xhat - lo) * v_hi, false);
                        model.add_row(format!("habove_{i}_{k}"), vec![(h, 1.0), (q, -1.0), (v, xhat)], Sense::Ge, 0.0);
                        model.add_row(format!("hbelow_{i}_{k}"), vec![(h, 1.0), (q, 1.0), (v, -xhat)], Sense::Ge, 0.0);
                        dev[i * m + k] = Some(h);
                        terms.push((h, eta));
                    }
                    _ => {}
                }
            }
        }
        model.add_row("budget", merge(terms), Sense::Le, 0.0);
    }
    for (c, con) in inst.constraints().iter().enumerate() {
        let i = con.target;
        let mut terms = vec![(v, -con.rhs)];
        for &(k, a) in &con.terms {
            terms.extend(scaled[i * m + k].iter().map(|&(var, c)| (var, a * c)));
        }
        let sense = match con.relation {
            crate::instance::Relation::Eq => Sense::Eq,
            crate::instance::Relation::Leq => Sense::Le,
        };
        model.add_row(format!("lin_{c}"), merge(terms), sense, 0.0);
    }

    let mut s = vec![Vec::new(); n];
    let mut y = vec![Vec::new(); n];
    let mut norm = Vec::new();
    for i in 0..n {
        let win = common.windows[i];
        s[i] = vec![None; pwl.segments()];
        y[i] = vec![None; pwl.segments()];
        // t_i = offset_i v − Σ γ_l s_il
        let u = inst.loss(i);
        let offset = common.score_offset(i);
        model.objective[v] -= offset;
        norm.push((v, u * offset));
        if pwl.segments() == 0 {
            continue;
        }
        for l in win.first..win.end {
            let sv = model.add_var(format!("s_{i}_{l}"), 0.0, pwl.lengths[l] * v_hi, false);
            model.add_row(format!("scap_{i}_{l}"), vec![(sv, 1.0), (v, -pwl.lengths[l])], Sense::Le, 0.0);
            model.objective[sv] += pwl.slopes[l];
            norm.push((sv, -u * pwl.slopes[l]));
            s[i][l] = Some(sv);
        }
        let mut terms: Vec<(usize, f64)> = (win.first..win.end).map(|l| (s[i][l].unwrap(), 1.0)).collect();
        terms.push((v, pwl.segment_start(win.first) - common.w_l1));
        for k in 0..m {
            if common.w[k] != 0.0 {
                terms.extend(scaled[i * m + k].iter().map(|&(var, c)| (var, common.w[k] * c)));
            }
        }
        model.add_row(format!("link_{i}"), merge(terms), Sense::Eq, 0.0);
        for l in win.first..win.end.saturating_sub(1) {
            let yv = model.add_binary(format!("y_{i}_{l}"));
            let g = product(&mut model, format!("g_{i}_{l}"), yv);
            let (sl, sn) = (s[i][l].unwrap(), s[i][l + 1].unwrap());
            model.add_row(format!("full_{i}_{l}"), vec![(g, pwl.lengths[l]), (sl, -1.0)], Sense::Le, 0.0);
            model.add_row(format!("next_{i}_{l}"), vec![(sn, 1.0), (g, -pwl.lengths[l + 1])], Sense::Le, 0.0);
            y[i][l] = Some((yv, g));
        }
    }
    model.add_row("normalize", merge(norm), Sense::Eq, 1.0);
    Ok(FractionalModel {
        common,
        model,
        v,
        entries,
        dev,
        s,
        y,
    })
}

fn merge(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (j, a) in terms {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

impl<'a> FractionalModel<'a> {
    pub fn encode(&self, config: &FeatureConfig) -> Option<Vec<f64>> {
        let inst = self.common.inst;
        let m = inst.m();
        let den: f64 = (0..inst.n()).map(|i| inst.loss(i) * self.common.approx_score(config.row(i))).sum();
        if den <= 0.0 {
            return None;
        }
        let v = 1.0 / den;
        let mut x = vec![0.0; self.model.num_vars()];
        x[self.v] = v;
        for i in 0..inst.n() {
            for k in 0..m {
                let val = config.get(i, k);
                match self.entries[i * m + k] {
                    (EntryVar::Binary(d), Some(b)) => {
                        x[d] = val;
                        x[b] = val * v;
                    }
                    (EntryVar::Continuous(q), _) => x[q] = val * v,
                    _ => {}
                }
                if let Some(h) = self.dev[i * m + k] {
                    x[h] = (val - inst.actual().get(i, k)).abs() * v;
                }
            }
            let (fill, full) = self.common.fill_with_flags(config.row(i));
            for l in 0..fill.len() {
                if let Some(sv) = self.s[i][l] {
                    x[sv] = fill[l] * v;
                }
                if let Some((yv, g)) = self.y[i][l] {
                    let on = if full[l] { 1.0 } else { 0.0 };
                    x[yv] = on;
                    x[g] = on * v;
                }
            }
        }
        Some(x)
    }

    pub fn decode(&self, x: &[f64]) -> FeatureConfig {
        let inst = self.common.inst;
        let m = inst.m();
        let v = x[self.v];
        let mut config = inst.actual().clone();
        for i in 0..inst.n() {
            for k in 0..m {
                let val = match self.entries[i * m + k] {
                    (EntryVar::Fixed(val), _) => val,
                    (EntryVar::Binary(d), _) => x[d].round(),
                    (EntryVar::Continuous(q), _) => {
                        let (lo, hi) = inst.entry_range(i, k);
                        if v > 0.0 {
                            (x[q] / v).clamp(lo, hi)
                        } else {
                            lo
                        }
                    }
                };
                config.set(i, k, val);
            }
        }
        config
    }
}

// ---------------------------------------------------------------------------
// planners

fn seed_configs(inst: &FdpInstance, w: &[f64]) -> Vec<FeatureConfig> {
    let mut seeds = vec![inst.actual().clone()];
    if let Ok(g) = plan_greedy(inst, &ScoreModel::classical(w.to_vec())) {
        seeds.push(g.config);
    }
    seeds
}

fn stats_status(s: MilpStatus) -> &'static str {
    match s {
        MilpStatus::Optimal => "optimal",
        MilpStatus::Target => "target_reached",
        MilpStatus::Infeasible => "infeasible",
        MilpStatus::Limit => "limit",
    }
}

/// Direct piecewise-linear MILP over the fractional objective; certificate
/// `2ε²`. Instances with a negative loss use the binary-search planner.
pub fn plan_milp(instance: &FdpInstance, weights: &[f64], epsilon: f64) -> Result<PlanResult> {
    plan_milp_with(instance, weights, epsilon, &MilpOptions::default())
}

pub fn plan_milp_with(instance: &FdpInstance, weights: &[f64], epsilon: f64, opts: &MilpOptions) -> Result<PlanResult> {
    let start = Instant::now();
    let model = ScoreModel::classical(weights.to_vec());
    classical_weights(&model, instance.m(), "plan_milp")?;
    if instance.losses().iter().any(|&u| u < 0.0) || instance.losses().iter().sum::<f64>() <= 0.0 {
        log::info!("losses allow a nonpositive denominator; falling back to binary search");
        let mut r = plan_milp_bs_with(instance, weights, epsilon, 1e-4, opts)?;
        r.algorithm = "milp".into();
        r.solver_stats.status = format!("bs_fallback_{}", r.solver_stats.status);
        return Ok(r);
    }
    let fm = build_fractional_model(instance, weights, epsilon)?;
    let seeds: Vec<Vec<f64>> = seed_configs(instance, weights).iter().filter_map(|c| fm.encode(c)).collect();
    let heuristic = |lp_x: &[f64]| fm.common.repair(fm.decode(lp_x)).and_then(|c| fm.encode(&c));
    let sol = solve_milp(&fm.model, &opts.bnb(), &seeds, Some(&heuristic))?;
    let x = sol
        .x
        .as_ref()
        .ok_or_else(|| FdpError::Solver("fractional MILP found no feasible point".into()))?;
    let config = fm.common.repair(fm.decode(x)).unwrap_or_else(|| instance.actual().clone());
    let gap = if sol.objective.is_finite() && sol.bound.is_finite() {
        Some((sol.objective - sol.bound).max(0.0))
    } else {
        None
    };
    let stats = SolverStats {
        status: stats_status(sol.status).into(),
        nodes: sol.nodes,
        lp_iterations: sol.lp_iterations,
        iterations: 1,
        gap,
        ..Default::default()
    };
    let mut r = PlanResult::finish(instance, &model, "milp", config, stats.with_time(start.elapsed()))?;
    r.surrogate_loss = Some(fm.common.surrogate_loss(&r.config));
    r.bound = Some(2.0 * epsilon * epsilon);
    Ok(r)
}

/// Binary search over the loss threshold with a linear MILP per step;
/// certificate `2ε² + ε_bs`.
pub fn plan_milp_bs(instance: &FdpInstance, weights: &[f64], epsilon: f64, eps_bs: f64) -> Result<PlanResult> {
    plan_milp_bs_with(instance, weights, epsilon, eps_bs, &MilpOptions::default())
}

pub fn plan_milp_bs_with(
    instance: &FdpInstance,
    weights: &[f64],
    epsilon: f64,
    eps_bs: f64,
    opts: &MilpOptions,
) -> Result<PlanResult> {
    let start = Instant::now();
    let model = ScoreModel::classical(weights.to_vec());
    classical_weights(&model, instance.m(), "plan_milp_bs")?;
    if !(eps_bs > 0.0) {
        return Err(FdpError::OutOfRange {
            name: "eps_bs",
            value: eps_bs,
            expected: "positive",
        });
    }
    let mut best = {
        let seeds = seed_configs(instance, weights);
        let probe = Common::new(instance, weights, epsilon)?;
        seeds
            .into_iter()
            .min_by(|a, b| probe.surrogate_loss(a).total_cmp(&probe.surrogate_loss(b)))
            .expect("at least the actual configuration")
    };
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut stats = SolverStats::default();
    let mut unresolved = false;
    while hi - lo > eps_bs {
        let delta = 0.5 * (lo + hi);
        let bs = build_bs_model(instance, weights, epsilon, delta)?;
        let target = -bs.constant;
        let mut bnb = opts.bnb();
        bnb.stop_at = Some(target);
        bnb.cutoff = Some(target + 1e-12);
        let seeds = vec![bs.encode(&best)];
        let heuristic = |lp_x: &[f64]| bs.repaired_candidate(lp_x);
        let sol = solve_milp(&bs.model, &bnb, &seeds, Some(&heuristic))?;
        stats.nodes += sol.nodes;
        stats.lp_iterations += sol.lp_iterations;
        stats.iterations += 1;
        let found = sol.x.as_ref().filter(|_| sol.objective <= target);
        match found {
            Some(x) => {
                if let Some(c) = bs.common.repair(bs.decode(x)) {
                    best = c;
                }
                hi = delta;
            }
            None => {
                if sol.status == MilpStatus::Limit {
                    unresolved = true;
                }
                lo = delta;
            }
        }
        log::debug!("binary search: delta {delta:.6}, interval [{lo:.6}, {hi:.6}], nodes {}", sol.nodes);
    }
    stats.status = if unresolved { "limit" } else { "optimal" }.into();
    stats.gap = Some(hi - lo);
    let surrogate = Common::new(instance, weights, epsilon)?.surrogate_loss(&best);
    let mut r = PlanResult::finish(instance, &model, "milp_bs", best, stats.with_time(start.elapsed()))?;
    r.surrogate_loss = Some(surrogate);
    r.bound = Some(2.0 * epsilon * epsilon + eps_bs);
    Ok(r)
}
