//! Problem model: targets, features, feasibility sets, budget and the
//! defender's expected loss.

use serde::{Deserialize, Serialize};

use crate::attacker::ScoreModel;
use crate::error::{FdpError, Result};

/// Absolute tolerance applied to every feasibility and constraint check.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Current version of the instance JSON document.
pub const INSTANCE_SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Binary,
}

/// Allowed set of a binary entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryDomain {
    /// Observed value must equal the actual value.
    Fixed,
    /// Either value may be shown.
    Free,
}

/// Feasible set of one `(target, feature)` entry around its actual value.
///
/// Continuous entries carry a radius `tau` (the set is
/// `[x̂ - tau, x̂ + tau] ∩ [0, 1]`); binary entries carry an allowed-set marker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryDomain {
    Radius(f64),
    Binary(BinaryDomain),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Eq,
    Leq,
}

/// Linear constraint over the observed features of a single target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConstraint {
    pub target: usize,
    /// `(feature index, coefficient)` pairs; feature indices are distinct.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn lhs(&self, row: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, a)| a * row[k]).sum()
    }

    /// Signed violation amount (positive when violated beyond nothing).
    pub fn violation(&self, row: &[f64]) -> f64 {
        let lhs = self.lhs(row);
        match self.relation {
            Relation::Eq => (lhs - self.rhs).abs(),
            Relation::Leq => (lhs - self.rhs).max(0.0),
        }
    }

    pub fn is_satisfied(&self, row: &[f64]) -> bool {
        self.violation(row) <= FEASIBILITY_TOL
    }
}

/// An `n × m` matrix of observed feature values, row-major by target.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl FeatureConfig {
    pub fn new(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if n.checked_mul(m) != Some(values.len()) {
            return Err(FdpError::dims("feature config", format!("{n}x{m}"), values.len()));
        }
        Ok(Self { n, m, values })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            values: vec![0.0; n * m],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(FdpError::dims("feature config", "at least one row", 0));
        }
        let m = rows[0].len();
        let mut values = Vec::with_capacity(n * m);
        for row in rows {
            if row.len() != m {
                return Err(FdpError::dims("feature config row", m, row.len()));
            }
            values.extend_from_slice(row);
        }
        Ok(Self { n, m, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.m + k]
    }

    pub fn set(&mut self, i: usize, k: usize, value: f64) {
        self.values[i * self.m + k] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub(crate) fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        if self.n != n || self.m != m {
            return Err(FdpError::dims(
                "feature config",
                format!("{n}x{m}"),
                format!("{}x{}", self.n, self.m),
            ));
        }
        Ok(())
    }
}

impl Serialize for FeatureConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        FeatureConfig::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryViolation {
    pub target: usize,
    pub feature: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub constraint: usize,
    pub target: usize,
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub entry_violations: Vec<EntryViolation>,
    pub constraint_violations: Vec<ConstraintViolation>,
    pub cost: f64,
    pub within_budget: bool,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.entry_violations.is_empty() && self.constraint_violations.is_empty() && self.within_budget
    }
}

/// Versioned JSON document for an instance. Also the plain-data way to
/// assemble an instance in code: fill it in and call [`FdpInstance::try_from`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub version: u64,
    pub n: usize,
    pub m: usize,
    pub kinds: Vec<FeatureKind>,
    pub actual: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    pub radii: Vec<Vec<EntryDomain>>,
    pub costs: Vec<Vec<f64>>,
    pub budget: f64,
    #[serde(default)]
    pub constraints: Vec<LinearConstraint>,
}

/// A validated FDP instance. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct FdpInstance {
    kinds: Vec<FeatureKind>,
    actual: FeatureConfig,
    losses: Vec<f64>,
    domains: Vec<EntryDomain>,
    costs: Vec<f64>,
    budget: f64,
    constraints: Vec<LinearConstraint>,
}

fn invalid(msg: impl Into<String>) -> FdpError {
    FdpError::InvalidInstance(msg.into())
}

impl TryFrom<InstanceDoc> for FdpInstance {
    type Error = FdpError;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.version != INSTANCE_SCHEMA_VERSION {
            return Err(FdpError::SchemaVersion {
                found: doc.version,
                expected: INSTANCE_SCHEMA_VERSION,
            });
        }
        let (n, m) = (doc.n, doc.m);
        if n == 0 || m == 0 {
            return Err(invalid("n and m must be positive"));
        }
        if doc.kinds.len() != m {
            return Err(FdpError::dims("kinds", m, doc.kinds.len()));
        }
        if doc.losses.len() != n {
            return Err(FdpError::dims("losses", n, doc.losses.len()));
        }
        let flatten = |what: &'static str, rows: &[Vec<f64>]| -> Result<Vec<f64>> {
            if rows.len() != n {
                return Err(FdpError::dims(what, n, rows.len()));
            }
            let mut out = Vec::with_capacity(n * m);
            for row in rows {
                if row.len() != m {
                    return Err(FdpError::dims(what, m, row.len()));
                }
                out.extend_from_slice(row);
            }
            Ok(out)
        };
        let actual = flatten("actual", &doc.actual)?;
        let costs = flatten("costs", &doc.costs)?;
        if doc.radii.len() != n {
            return Err(FdpError::dims("radii", n, doc.radii.len()));
        }
        let mut domains = Vec::with_capacity(n * m);
        for row in &doc.radii {
            if row.len() != m {
                return Err(FdpError::dims("radii", m, row.len()));
            }
            domains.extend_from_slice(row);
        }
        let inst = FdpInstance {
            kinds: doc.kinds,
            actual: FeatureConfig::new(n, m, actual)?,
            losses: doc.losses,
            domains,
            costs,
            budget: doc.budget,
            constraints: doc.constraints,
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl From<&FdpInstance> for InstanceDoc {
    fn from(inst: &FdpInstance) -> Self {
        let (n, m) = (inst.n(), inst.m());
        InstanceDoc {
            version: INSTANCE_SCHEMA_VERSION,
            n,
            m,
            kinds: inst.kinds.clone(),
            actual: inst.actual.to_rows(),
            losses: inst.losses.clone(),
            radii: (0..n).map(|i| inst.domains[i * m..(i + 1) * m].to_vec()).collect(),
            costs: (0..n).map(|i| inst.costs[i * m..(i + 1) * m].to_vec()).collect(),
            budget: inst.budget,
            constraints: inst.constraints.clone(),
        }
    }
}

impl Serialize for FdpInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InstanceDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FdpInstance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = InstanceDoc::deserialize(d)?;
        FdpInstance::try_from(doc).map_err(serde::de::Error::custom)
    }
}

impl FdpInstance {
    fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        for (i, &u) in self.losses.iter().enumerate() {
            if !u.is_finite() || !(-1.0..=1.0).contains(&u) {
                return Err(invalid(format!("loss of target {i} is {u}, outside [-1, 1]")));
            }
        }
        if !self.budget.is_finite() || self.budget < 0.0 {
            return Err(invalid(format!("budget {} must be finite and nonnegative", self.budget)));
        }
        for i in 0..n {
            for k in 0..m {
                let x = self.actual.get(i, k);
                let eta = self.cost(i, k);
                if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                    return Err(invalid(format!("actual[{i}][{k}] = {x} outside [0, 1]")));
                }
                if !eta.is_finite() {
                    return Err(invalid(format!("cost[{i}][{k}] is not finite")));
                }
                match (self.kinds[k], self.domain(i, k)) {
                    (FeatureKind::Continuous, EntryDomain::Radius(tau)) => {
                        if !tau.is_finite() || !(0.0..=1.0).contains(&tau) {
                            return Err(invalid(format!("radius[{i}][{k}] = {tau} outside [0, 1]")));
                        }
                        if eta < 0.0 {
                            return Err(invalid(format!(
                                "continuous cost[{i}][{k}] = {eta} must be nonnegative"
                            )));
                        }
                    }
                    (FeatureKind::Binary, EntryDomain::Binary(_)) => {
                        if x != 0.0 && x != 1.0 {
                            return Err(invalid(format!("binary actual[{i}][{k}] = {x} not in {{0, 1}}")));
                        }
                    }
                    (FeatureKind::Continuous, EntryDomain::Binary(_)) => {
                        return Err(invalid(format!(
                            "continuous entry [{i}][{k}] needs a numeric radius"
                        )))
                    }
                    (FeatureKind::Binary, EntryDomain::Radius(_)) => {
                        return Err(invalid(format!(
                            "binary entry [{i}][{k}] needs a \"fixed\" or \"free\" marker"
                        )))
                    }
                }
            }
        }
        for (c, con) in self.constraints.iter().enumerate() {
            if con.target >= n {
                return Err(invalid(format!("constraint {c} targets {} but n = {n}", con.target)));
            }
            if !con.rhs.is_finite() {
                return Err(invalid(format!("constraint {c} has non-finite rhs")));
            }
            let mut seen = vec![false; m];
            for &(k, a) in &con.terms {
                if k >= m {
                    return Err(invalid(format!("constraint {c} references feature {k} but m = {m}")));
                }
                if seen[k] {
                    return Err(invalid(format!("constraint {c} repeats feature {k}")));
                }
                if !a.is_finite() {
                    return Err(invalid(format!("constraint {c} has a non-finite coefficient")));
                }
                seen[k] = true;
            }
            if !con.is_satisfied(self.actual.row(con.target)) {
                return Err(invalid(format!("actual configuration violates constraint {c}")));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(s)?;
        FdpInstance::try_from(doc)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceDoc::from(self))?)
    }

    pub fn n(&self) -> usize {
        self.actual.n()
    }

    pub fn m(&self) -> usize {
        self.actual.m()
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn kind(&self, k: usize) -> FeatureKind {
        self.kinds[k]
    }

    pub fn actual(&self) -> &FeatureConfig {
        &self.actual
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn loss(&self, i: usize) -> f64 {
        self.losses[i]
    }

    pub fn domain(&self, i: usize, k: usize) -> EntryDomain {
        self.domains[i * self.m() + k]
    }

    pub fn cost(&self, i: usize, k: usize) -> f64 {
        self.costs[i * self.m() + k]
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn constraints_for(&self, i: usize) -> impl Iterator<Item = &LinearConstraint> {
        self.constraints.iter().filter(move |c| c.target == i)
    }

    /// Copy of the instance with a different budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        let mut out = self.clone();
        out.budget = budget;
        out.validate()?;
        Ok(out)
    }

    /// Copy of the instance with different losses.
    pub fn with_losses(&self, losses: Vec<f64>) -> Result<Self> {
        if losses.len() != self.n() {
            return Err(FdpError::dims("losses", self.n(), losses.len()));
        }
        let mut out = self.clone();
        out.losses = losses;
        out.validate()?;
        Ok(out)
    }

    /// Interval `[lo, hi]` of values an entry may take. Binary entries report
    /// the hull of their allowed set.
    pub fn entry_range(&self, i: usize, k: usize) -> (f64, f64) {
        let x = self.actual.get(i, k);
        match self.domain(i, k) {
            EntryDomain::Radius(tau) => ((x - tau).max(0.0), (x + tau).min(1.0)),
            EntryDomain::Binary(BinaryDomain::Fixed) => (x, x),
            EntryDomain::Binary(BinaryDomain::Free) => (0.0, 1.0),
        }
    }

    /// Whether `value` lies in the feasible set of entry `(i, k)`.
    pub fn entry_allows(&self, i: usize, k: usize, value: f64) -> bool {
        let x = self.actual.get(i, k);
        match self.domain(i, k) {
            EntryDomain::Radius(tau) => {
                (0.0..=1.0).contains(&value) && (value - x).abs() <= tau + FEASIBILITY_TOL
            }
            EntryDomain::Binary(BinaryDomain::Fixed) => value == x,
            EntryDomain::Binary(BinaryDomain::Free) => value == 0.0 || value == 1.0,
        }
    }

    pub fn continuous_features(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m()).filter(|&k| self.kinds[k] == FeatureKind::Continuous)
    }

    pub fn binary_features(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m()).filter(|&k| self.kinds[k] == FeatureKind::Binary)
    }

    /// Cost of target `i` showing feature row `row`.
    pub fn target_cost(&self, i: usize, row: &[f64]) -> f64 {
        (0..self.m())
            .map(|k| self.cost(i, k) * (row[k] - self.actual.get(i, k)).abs())
            .sum()
    }

    /// Largest total cost any feasible configuration can incur.
    pub fn max_total_cost(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n() {
            for k in 0..self.m() {
                let (lo, hi) = self.entry_range(i, k);
                let x = self.actual.get(i, k);
                let dev = (x - lo).max(hi - x);
                total += (self.cost(i, k) * dev).max(0.0);
            }
        }
        total
    }

    /// True when no budget, feasibility or linear constraint can bind: every
    /// entry ranges over all of `[0, 1]` (or `{0, 1}`) and the budget covers
    /// the most expensive configuration.
    pub fn is_unconstrained(&self) -> bool {
        if !self.constraints.is_empty() {
            return false;
        }
        for i in 0..self.n() {
            for k in 0..self.m() {
                if self.entry_range(i, k) != (0.0, 1.0) {
                    return false;
                }
            }
        }
        self.max_total_cost() <= self.budget + FEASIBILITY_TOL
    }
}

/// Total deception cost `Σ_i Σ_k η_ik |x_ik − x̂_ik|`.
pub fn deception_cost(instance: &FdpInstance, config: &FeatureConfig) -> Result<f64> {
    config.check_dims(instance.n(), instance.m())?;
    Ok((0..instance.n()).map(|i| instance.target_cost(i, config.row(i))).sum())
}

pub fn check_feasibility(instance: &FdpInstance, config: &FeatureConfig) -> Result<FeasibilityReport> {
    config.check_dims(instance.n(), instance.m())?;
    let mut entry_violations = Vec::new();
    for i in 0..instance.n() {
        for k in 0..instance.m() {
            let v = config.get(i, k);
            if !instance.entry_allows(i, k, v) {
                entry_violations.push(EntryViolation {
                    target: i,
                    feature: k,
                    value: v,
                });
            }
        }
    }
    let mut constraint_violations = Vec::new();
    for (c, con) in instance.constraints.iter().enumerate() {
        let amount = con.violation(config.row(con.target));
        if amount > FEASIBILITY_TOL {
            constraint_violations.push(ConstraintViolation {
                constraint: c,
                target: con.target,
                amount,
            });
        }
    }
    let cost = deception_cost(instance, config)?;
    Ok(FeasibilityReport {
        entry_violations,
        constraint_violations,
        cost,
        within_budget: cost <= instance.budget + FEASIBILITY_TOL,
    })
}

/// Defender's expected loss `Σ_i f(x_i) u_i / Σ_i f(x_i)` under `model`.
pub fn expected_loss(instance: &FdpInstance, model: &ScoreModel, config: &FeatureConfig) -> Result<f64> {
    config.check_dims(instance.n(), instance.m())?;
    let p = model.attack_distribution(config)?;
    Ok(loss_from_distribution(&p, instance.losses()))
}

pub(crate) fn loss_from_distribution(p: &[f64], losses: &[f64]) -> f64 {
    let u: f64 = p.iter().zip(losses).map(|(p, u)| p * u).sum();
    let lo = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    u.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_binary(eta: f64) -> FdpInstance {
        FdpInstance::try_from(InstanceDoc {
            version: 1,
            n: 1,
            m: 1,
            kinds: vec![FeatureKind::Binary],
            actual: vec![vec![0.0]],
            losses: vec![0.5],
            radii: vec![vec![EntryDomain::Binary(BinaryDomain::Free)]],
            costs: vec![vec![eta]],
            budget: 5.0,
            constraints: vec![],
        })
        .unwrap()
    }

    fn one_continuous(x: f64, tau: f64) -> FdpInstance {
        FdpInstance::try_from(InstanceDoc {
            version: 1,
            n: 1,
            m: 1,
            kinds: vec![FeatureKind::Continuous],
            actual: vec![vec![x]],
            losses: vec![0.3],
            radii: vec![vec![EntryDomain::Radius(tau)]],
            costs: vec![vec![1.0]],
            budget: 1.0,
            constraints: vec![],
        })
        .unwrap()
    }

    #[test]
    fn single_switch_costs_eta() {
        let inst = single_binary(2.0);
        let x = FeatureConfig::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(deception_cost(&inst, &x).unwrap(), 2.0);
        assert_eq!(deception_cost(&inst, inst.actual()).unwrap(), 0.0);
    }

    #[test]
    fn radius_exceeded_is_reported() {
        let inst = one_continuous(0.5, 0.1);
        let x = FeatureConfig::new(1, 1, vec![0.7]).unwrap();
        let report = check_feasibility(&inst, &x).unwrap();
        assert_eq!(report.entry_violations.len(), 1);
        assert!(!report.is_feasible());

        let ok = FeatureConfig::new(1, 1, vec![0.6]).unwrap();
        assert!(check_feasibility(&inst, &ok).unwrap().is_feasible());
    }

    #[test]
    fn actual_is_always_feasible() {
        let inst = one_continuous(0.9, 0.4);
        let report = check_feasibility(&inst, inst.actual()).unwrap();
        assert!(report.is_feasible());
        assert_eq!(report.cost, 0.0);
        assert_eq!(inst.entry_range(0, 0), (0.5, 1.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let inst = single_binary(1.0);
        let x = FeatureConfig::zeros(2, 1);
        assert!(matches!(
            deception_cost(&inst, &x),
            Err(FdpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_documents() {
        let good = InstanceDoc::from(&single_binary(1.0));
        let mut doc = good.clone();
        doc.version = 2;
        assert!(matches!(
            FdpInstance::try_from(doc),
            Err(FdpError::SchemaVersion { found: 2, .. })
        ));

        let mut doc = good.clone();
        doc.actual = vec![vec![0.5]];
        assert!(FdpInstance::try_from(doc).is_err());

        let mut doc = good.clone();
        doc.radii = vec![vec![EntryDomain::Radius(0.2)]];
        assert!(FdpInstance::try_from(doc).is_err());

        let mut doc = good.clone();
        doc.losses = vec![1.5];
        assert!(FdpInstance::try_from(doc).is_err());

        let mut doc = good;
        doc.constraints = vec![LinearConstraint {
            target: 0,
            terms: vec![(0, 1.0)],
            relation: Relation::Eq,
            rhs: 1.0,
        }];
        assert!(FdpInstance::try_from(doc).is_err(), "actual must satisfy constraints");
    }

    #[test]
    fn json_rejects_unknown_fields() {
        let inst = single_binary(1.0);
        let mut v: serde_json::Value = serde_json::from_str(&inst.to_json_string().unwrap()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(FdpInstance::from_json_str(&v.to_string()).is_err());
    }

    #[test]
    fn json_markers_and_radii() {
        let inst = single_binary(1.0);
        let s = inst.to_json_string().unwrap();
        assert!(s.contains("\"free\""));
        assert_eq!(FdpInstance::from_json_str(&s).unwrap(), inst);
    }
}
