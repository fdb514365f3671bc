//! Dense two-phase primal simplex with bounded variables.
//!
//! Nonbasic variables at their upper bound are handled by complementing the
//! column (`x = u - x'`), so every nonbasic variable sits at zero in tableau
//! space and a bound flip is a column negation.

use crate::error::{FdpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min c·x  s.t.  rows,  lower ≤ x ≤ upper`. Lower bounds must be finite;
/// upper bounds may be `+∞`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const DEGENERATE_SWITCH: usize = 40;

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows × (cols + 1)`, last column holds basic values.
    a: Vec<f64>,
    /// reduced costs, `cols` entries
    d: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    flipped: Vec<bool>,
    is_basic: Vec<bool>,
    banned: Vec<bool>,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

impl Tableau {
    #[inline]
    fn w(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.a[r * (self.cols + 1) + self.cols]
    }

    fn flip_nonbasic(&mut self, j: usize) {
        let u = self.upper[j];
        let w = self.w();
        for r in 0..self.rows {
            let idx = r * w;
            let v = self.a[idx + j];
            if v != 0.0 {
                self.a[idx + self.cols] -= v * u;
                self.a[idx + j] = -v;
            }
        }
        self.d[j] = -self.d[j];
        self.flipped[j] = !self.flipped[j];
    }

    fn flip_basic_row(&mut self, r: usize) {
        let j = self.basis[r];
        let u = self.upper[j];
        let w = self.w();
        let row = &mut self.a[r * w..(r + 1) * w];
        for (c, v) in row.iter_mut().enumerate() {
            if c != j {
                *v = -*v;
            }
        }
        row[self.cols] += u;
        self.flipped[j] = !self.flipped[j];
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.w();
        let piv = self.a[p * w + q];
        {
            let row = &mut self.a[p * w..(p + 1) * w];
            let inv = 1.0 / piv;
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[q] = 1.0;
        }
        let prow: Vec<f64> = self.a[p * w..(p + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == p {
                continue;
            }
            let f = self.a[r * w + q];
            if f != 0.0 {
                let row = &mut self.a[r * w..(r + 1) * w];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(&prow[..self.cols]) {
                *v -= f * pv;
            }
            self.d[q] = 0.0;
        }
        let leaving = self.basis[p];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.basis[p] = q;
        self.iterations += 1;
    }

    fn step(&mut self, bland: bool, degenerate: &mut usize) -> Step {
        let mut q = usize::MAX;
        let mut best = -COST_TOL;
        for j in 0..self.cols {
            if self.is_basic[j] || self.banned[j] {
                continue;
            }
            let dj = self.d[j];
            if dj < best {
                q = j;
                if bland {
                    break;
                }
                best = dj;
            }
        }
        if q == usize::MAX {
            return Step::Optimal;
        }
        let w = self.w();
        let mut theta = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None;
        let mut leave_mag = 0.0;
        for r in 0..self.rows {
            let alpha = self.a[r * w + q];
            let (t, to_upper) = if alpha > PIVOT_TOL {
                (self.a[r * w + self.cols].max(0.0) / alpha, false)
            } else if alpha < -PIVOT_TOL {
                let ub = self.upper[self.basis[r]];
                if ub.is_finite() {
                    ((ub - self.a[r * w + self.cols]).max(0.0) / -alpha, true)
                } else {
                    continue;
                }
            } else {
                continue;
            };
            let better = if bland {
                t < theta - 1e-12
                    || (t <= theta + 1e-12 && leave.is_some_and(|(lr, _)| self.basis[r] < self.basis[lr]))
            } else {
                t < theta - 1e-12 || (t <= theta + 1e-12 && alpha.abs() > leave_mag)
            };
            if better || leave.is_none() && t <= theta {
                theta = t;
                leave = Some((r, to_upper));
                leave_mag = alpha.abs();
            }
        }
        let uq = self.upper[q];
        if uq.is_finite() && uq <= theta {
            self.flip_nonbasic(q);
            self.iterations += 1;
            *degenerate = 0;
            return Step::Continue;
        }
        let Some((p, to_upper)) = leave else {
            return Step::Unbounded;
        };
        if theta <= 1e-12 {
            *degenerate += 1;
        } else {
            *degenerate = 0;
        }
        if to_upper {
            self.flip_basic_row(p);
        }
        self.pivot(p, q);
        Step::Continue
    }

    fn run(&mut self, max_iter: usize) -> Result<Step> {
        let mut degenerate = 0;
        loop {
            if self.iterations > max_iter {
                return Err(FdpError::Solver(format!("simplex iteration limit {max_iter} reached")));
            }
            let bland = degenerate > DEGENERATE_SWITCH;
            match self.step(bland, &mut degenerate) {
                Step::Continue => {}
                other => return Ok(other),
            }
        }
    }

    fn value(&self, j: usize) -> f64 {
        let raw = if self.is_basic[j] {
            let r = self.basis.iter().position(|&b| b == j).expect("basic column has a row");
            self.rhs(r)
        } else {
            0.0
        };
        if self.flipped[j] {
            self.upper[j] - raw
        } else {
            raw
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let nv = lp.objective.len();
    if lp.lower.len() != nv || lp.upper.len() != nv {
        return Err(FdpError::Solver("bound vectors do not match the objective length".into()));
    }
    let mut width = vec![0.0; nv];
    for j in 0..nv {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if !l.is_finite() || u.is_nan() {
            return Err(FdpError::Solver(format!("variable {j} needs a finite lower bound")));
        }
        if u < l - 1e-12 {
            return Ok(infeasible(nv, 0));
        }
        width[j] = (u - l).max(0.0);
    }

    // normalize rows to nonnegative rhs after shifting x = l + x'
    struct NRow {
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    }
    let mut rows = Vec::with_capacity(lp.rows.len());
    for row in &lp.rows {
        let mut rhs = row.rhs;
        for &(j, a) in &row.terms {
            if j >= nv {
                return Err(FdpError::Solver(format!("row references variable {j} of {nv}")));
            }
            rhs -= a * lp.lower[j];
        }
        let (terms, sense, rhs) = if rhs < 0.0 {
            let flipped = match row.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            (row.terms.iter().map(|&(j, a)| (j, -a)).collect(), flipped, -rhs)
        } else {
            (row.terms.clone(), row.sense, rhs)
        };
        rows.push(NRow { terms, sense, rhs });
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.sense != Sense::Le).count();
    let cols = nv + n_slack + n_art;
    let w = cols + 1;
    let mut a = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut upper = vec![f64::INFINITY; cols];
    upper[..nv].copy_from_slice(&width);
    let mut art_rows = Vec::new();
    let (mut s, mut t) = (nv, nv + n_slack);
    for (r, row) in rows.iter().enumerate() {
        for &(j, v) in &row.terms {
            a[r * w + j] += v;
        }
        a[r * w + cols] = row.rhs;
        match row.sense {
            Sense::Le => {
                a[r * w + s] = 1.0;
                basis[r] = s;
                s += 1;
            }
            Sense::Ge => {
                a[r * w + s] = -1.0;
                s += 1;
                a[r * w + t] = 1.0;
                basis[r] = t;
                art_rows.push(r);
                t += 1;
            }
            Sense::Eq => {
                a[r * w + t] = 1.0;
                basis[r] = t;
                art_rows.push(r);
                t += 1;
            }
        }
    }
    let mut is_basic = vec![false; cols];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut tab = Tableau {
        rows: m,
        cols,
        a,
        d: vec![0.0; cols],
        basis,
        upper,
        flipped: vec![false; cols],
        is_basic,
        banned: vec![false; cols],
        iterations: 0,
    };
    let max_iter = 50 * (m + cols) + 1000;

    if !art_rows.is_empty() {
        for &r in &art_rows {
            for j in 0..nv + n_slack {
                tab.d[j] -= tab.a[r * w + j];
            }
        }
        match tab.run(max_iter)? {
            Step::Unbounded => return Err(FdpError::Solver("phase one reported unbounded".into())),
            _ => {}
        }
        let infeas: f64 = (0..tab.rows)
            .filter(|&r| tab.basis[r] >= nv + n_slack)
            .map(|r| tab.rhs(r))
            .sum();
        let scale = 1.0 + rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeas > PHASE1_TOL * scale {
            return Ok(infeasible(nv, tab.iterations));
        }
        // drive zero-valued artificials out of the basis
        let mut redundant = Vec::new();
        for r in 0..tab.rows {
            if tab.basis[r] < nv + n_slack {
                continue;
            }
            let mut best = None;
            let mut mag = PIVOT_TOL;
            for j in 0..nv + n_slack {
                if !tab.is_basic[j] && tab.at(r, j).abs() > mag {
                    mag = tab.at(r, j).abs();
                    best = Some(j);
                }
            }
            match best {
                Some(j) => tab.pivot(r, j),
                None => redundant.push(r),
            }
        }
        tab = compact(tab, nv + n_slack, &redundant);
    }

    // phase two reduced costs
    let ncols = tab.cols;
    let cost = |j: usize, flipped: bool| -> f64 {
        let c = if j < nv { lp.objective[j] } else { 0.0 };
        if flipped {
            -c
        } else {
            c
        }
    };
    let mut d: Vec<f64> = (0..ncols).map(|j| cost(j, tab.flipped[j])).collect();
    for r in 0..tab.rows {
        let b = tab.basis[r];
        let cb = cost(b, tab.flipped[b]);
        if cb != 0.0 {
            for (j, dj) in d.iter_mut().enumerate() {
                *dj -= cb * tab.at(r, j);
            }
        }
    }
    for &b in &tab.basis {
        d[b] = 0.0;
    }
    tab.d = d;
    tab.banned = vec![false; ncols];
    let status = match tab.run(max_iter)? {
        Step::Unbounded => LpStatus::Unbounded,
        _ => LpStatus::Optimal,
    };
    let mut pos = vec![usize::MAX; ncols];
    for (r, &b) in tab.basis.iter().enumerate() {
        pos[b] = r;
    }
    let x: Vec<f64> = (0..nv)
        .map(|j| {
            let raw = if pos[j] != usize::MAX { tab.rhs(pos[j]) } else { 0.0 };
            let v = if tab.flipped[j] { tab.upper[j] - raw } else { raw };
            lp.lower[j] + v.clamp(0.0, width[j])
        })
        .collect();
    debug_assert!(nv == 0 || tab.value(0).is_finite());
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status,
        x,
        objective,
        iterations: tab.iterations,
    })
}

fn infeasible(nv: usize, iterations: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; nv],
        objective: f64::INFINITY,
        iterations,
    }
}

/// Drops artificial columns (index ≥ `keep`) and redundant rows.
fn compact(tab: Tableau, keep: usize, redundant: &[usize]) -> Tableau {
    let w_old = tab.cols + 1;
    let w = keep + 1;
    let rows: Vec<usize> = (0..tab.rows).filter(|r| !redundant.contains(r)).collect();
    let mut a = vec![0.0; rows.len() * w];
    let mut basis = Vec::with_capacity(rows.len());
    for (nr, &r) in rows.iter().enumerate() {
        a[nr * w..nr * w + keep].copy_from_slice(&tab.a[r * w_old..r * w_old + keep]);
        a[nr * w + keep] = tab.a[r * w_old + tab.cols];
        basis.push(tab.basis[r]);
    }
    let mut is_basic = vec![false; keep];
    for &b in &basis {
        is_basic[b] = true;
    }
    Tableau {
        rows: rows.len(),
        cols: keep,
        a,
        d: vec![0.0; keep],
        basis,
        upper: tab.upper[..keep].to_vec(),
        flipped: tab.flipped[..keep].to_vec(),
        is_basic,
        banned: vec![false; keep],
        iterations: tab.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(terms: &[(usize, f64)], sense: Sense, rhs: f64) -> Row {
        Row {
            terms: terms.to_vec(),
            sense,
            rhs,
        }
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let lp = LinearProgram {
            objective: vec![-3.0, -5.0],
            rows: vec![
                row(&[(0, 1.0)], Sense::Le, 4.0),
                row(&[(1, 2.0)], Sense::Le, 12.0),
                row(&[(0, 3.0), (1, 2.0)], Sense::Le, 18.0),
            ],
            lower: vec![0.0; 2],
            upper: vec![f64::INFINITY; 2],
        };
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_equalities_and_ge_rows() {
        // min x + 2y + 3z, x + y + z = 2, y >= 0.5, x <= 0.75, z in [0.1, 1]
        let lp = LinearProgram {
            objective: vec![1.0, 2.0, 3.0],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Eq, 2.0),
                row(&[(1, 1.0)], Sense::Ge, 0.5),
            ],
            lower: vec![0.0, 0.0, 0.1],
            upper: vec![0.75, f64::INFINITY, 1.0],
        };
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // x = 0.75, z = 0.1, y = 1.15
        assert!((s.x[0] - 0.75).abs() < 1e-9);
        assert!((s.x[1] - 1.15).abs() < 1e-9);
        assert!((s.x[2] - 0.1).abs() < 1e-9);
        assert!((s.objective - (0.75 + 2.3 + 0.3)).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let lp = LinearProgram {
            objective: vec![1.0],
            rows: vec![row(&[(0, 1.0)], Sense::Ge, 2.0)],
            lower: vec![0.0],
            upper: vec![1.0],
        };
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
        let lp = LinearProgram {
            objective: vec![-1.0, 0.0],
            rows: vec![row(&[(0, 1.0), (1, -1.0)], Sense::Le, 1.0)],
            lower: vec![0.0; 2],
            upper: vec![f64::INFINITY; 2],
        };
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn upper_bounded_vars_flip() {
        // max sum x_i with x_i <= 1 and sum x_i <= 2.5 over 4 vars
        let lp = LinearProgram {
            objective: vec![-1.0, -1.1, -1.2, -1.3],
            rows: vec![row(&[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], Sense::Le, 2.5)],
            lower: vec![0.0; 4],
            upper: vec![1.0; 4],
        };
        let s = solve(&lp).unwrap();
        assert!((s.objective + (1.3 + 1.2 + 0.5 * 1.1)).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 1.0),
                row(&[(0, 2.0), (1, 2.0)], Sense::Eq, 2.0),
            ],
            lower: vec![0.0; 2],
            upper: vec![f64::INFINITY; 2],
        };
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }
}
