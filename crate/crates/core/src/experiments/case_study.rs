//! Ten-node credit-bureau network with requirement-rule attackers.

use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::attacker::{Requirement, ScoreModel};
use crate::error::Result;
use crate::instance::{
    check_feasibility, expected_loss, BinaryDomain, EntryDomain, FdpInstance, FeatureConfig, FeatureKind,
    InstanceDoc, LinearConstraint, Relation, INSTANCE_SCHEMA_VERSION,
};
use crate::planning::{brute_force_plan, plan_exact_discrete_cost, BruteForceOptions};

pub const FEATURE_NAMES: [&str; 6] = ["windows", "smtp", "netbios", "http", "sql", "samba"];
pub const NODE_TYPES: [&str; 10] = [
    "mail", "mail", "web", "app", "app", "database", "database", "database", "database", "database",
];
const OS: usize = 0;
const SMTP: usize = 1;
const NETBIOS: usize = 2;
const HTTP: usize = 3;
const SQL: usize = 4;
const SAMBA: usize = 5;

/// Losses in tenths, so expected losses can be computed exactly.
const LOSS_TENTHS: [i64; 10] = [1, 1, 2, 3, 3, 4, 4, 4, 8, 8];
const FEATURE_COSTS: [f64; 6] = [5.0, 1.0, 1.0, 2.0, 2.0, 2.0];
pub const CASE_STUDY_BUDGET: f64 = 10.0;
/// Weight given to each requirement feature in the smooth approximation of
/// a rule attacker.
pub const RULE_APPROX_WEIGHT: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStudyProfile {
    /// Targets Linux machines running SMTP and SQL.
    Apt,
    /// Targets Windows machines exposing NetBIOS.
    Botnet,
}

impl CaseStudyProfile {
    pub fn requirements(self) -> Vec<Requirement> {
        match self {
            CaseStudyProfile::Apt => vec![Requirement::new(OS, 0.0), Requirement::new(SMTP, 1.0), Requirement::new(SQL, 1.0)],
            CaseStudyProfile::Botnet => vec![Requirement::new(OS, 1.0), Requirement::new(NETBIOS, 1.0)],
        }
    }

    pub fn attacker(self) -> ScoreModel {
        ScoreModel::requirement_rule(self.requirements())
    }

    /// Classical weights `±10` on the requirement features, zero elsewhere.
    pub fn approximate_weights(self) -> Vec<f64> {
        let mut w = vec![0.0; FEATURE_NAMES.len()];
        for r in self.requirements() {
            w[r.feature] = if r.value == 1.0 { RULE_APPROX_WEIGHT } else { -RULE_APPROX_WEIGHT };
        }
        w
    }

    /// Reference deception plan as `(node, feature, shown value)` switches.
    pub fn published_switches(self) -> Vec<(usize, usize, f64)> {
        match self {
            CaseStudyProfile::Apt => vec![
                (1, OS, 0.0),
                (1, NETBIOS, 0.0),
                (1, SQL, 1.0),
                (8, SMTP, 0.0),
                (9, SMTP, 0.0),
            ],
            CaseStudyProfile::Botnet => vec![(3, NETBIOS, 0.0), (4, NETBIOS, 0.0)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseStudyProfile::Apt => "apt",
            CaseStudyProfile::Botnet => "botnet",
        }
    }
}

fn actual_row(node: usize) -> [f64; 6] {
    let mut row = [0.0; 6];
    let on: &[usize] = match NODE_TYPES[node] {
        "mail" => &[OS, SMTP, NETBIOS],
        "web" => &[OS, HTTP],
        "app" => &[OS, SQL, NETBIOS],
        _ => &[SQL, SMTP, SAMBA],
    };
    for &k in on {
        row[k] = 1.0;
    }
    row
}

/// The network: six binary features that may all be switched, costs 5 for
/// the operating system, 2 for SQL, Samba and HTTP, 1 for SMTP and NetBIOS,
/// budget 10, and on every node "Windows and Samba exclude each other" and
/// "NetBIOS needs Windows".
pub fn case_study_instance() -> FdpInstance {
    let n = NODE_TYPES.len();
    let m = FEATURE_NAMES.len();
    let mut constraints = Vec::new();
    for i in 0..n {
        constraints.push(LinearConstraint {
            target: i,
            terms: vec![(OS, 1.0), (SAMBA, 1.0)],
            relation: Relation::Leq,
            rhs: 1.0,
        });
        constraints.push(LinearConstraint {
            target: i,
            terms: vec![(NETBIOS, 1.0), (OS, -1.0)],
            relation: Relation::Leq,
            rhs: 0.0,
        });
    }
    FdpInstance::try_from(InstanceDoc {
        version: INSTANCE_SCHEMA_VERSION,
        n,
        m,
        kinds: vec![FeatureKind::Binary; m],
        actual: (0..n).map(|i| actual_row(i).to_vec()).collect(),
        losses: LOSS_TENTHS.iter().map(|&t| t as f64 / 10.0).collect(),
        radii: vec![vec![EntryDomain::Binary(BinaryDomain::Free); m]; n],
        costs: vec![FEATURE_COSTS.to_vec(); n],
        budget: CASE_STUDY_BUDGET,
        constraints,
    })
    .expect("case-study instance is valid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureChange {
    pub node: usize,
    pub feature: String,
    pub from: f64,
    pub to: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyState {
    /// Nodes with positive attack probability.
    pub attacked: Vec<usize>,
    pub loss: f64,
    /// Expected loss as a reduced fraction, from integer arithmetic.
    pub loss_exact: String,
    pub cost: f64,
    pub changes: Vec<FeatureChange>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub profile: CaseStudyProfile,
    pub budget: f64,
    pub before: CaseStudyState,
    /// The reference plan applied to the network.
    pub published: CaseStudyState,
    /// Optimal plan against the rule attacker, by exhaustive search.
    pub planned: CaseStudyState,
    /// Plan optimized against the large-weight classical approximation,
    /// evaluated against the rule attacker.
    pub approximation: CaseStudyState,
}

/// Exact expected loss of a uniform attack over `attacked`.
pub fn exact_uniform_loss(attacked: &[usize]) -> Ratio<i64> {
    let total: i64 = attacked.iter().map(|&i| LOSS_TENTHS[i]).sum();
    Ratio::new(total, 10 * attacked.len() as i64)
}

fn state(inst: &FdpInstance, attacker: &ScoreModel, config: &FeatureConfig) -> Result<CaseStudyState> {
    let p = attacker.attack_distribution(config)?;
    let attacked: Vec<usize> = (0..inst.n()).filter(|&i| p[i] > 0.0).collect();
    let mut changes = Vec::new();
    for i in 0..inst.n() {
        for k in 0..inst.m() {
            let (from, to) = (inst.actual().get(i, k), config.get(i, k));
            if from != to {
                changes.push(FeatureChange {
                    node: i,
                    feature: FEATURE_NAMES[k].into(),
                    from,
                    to,
                });
            }
        }
    }
    Ok(CaseStudyState {
        loss: expected_loss(inst, attacker, config)?,
        loss_exact: exact_uniform_loss(&attacked).to_string(),
        attacked,
        cost: check_feasibility(inst, config)?.cost,
        changes,
    })
}

pub fn published_config(profile: CaseStudyProfile) -> FeatureConfig {
    let mut config = case_study_instance().actual().clone();
    for (i, k, v) in profile.published_switches() {
        config.set(i, k, v);
    }
    config
}

/// Baseline, reference plan, exhaustive optimum against the rule, and the
/// plan obtained through the classical approximation.
pub fn run_case_study(profile: CaseStudyProfile) -> Result<CaseStudyReport> {
    let inst = case_study_instance();
    let attacker = profile.attacker();
    let planned = brute_force_plan(&inst, &attacker, &BruteForceOptions::default())?;
    let approx = plan_exact_discrete_cost(&inst, &profile.approximate_weights())?;
    Ok(CaseStudyReport {
        profile,
        budget: inst.budget(),
        before: state(&inst, &attacker, inst.actual())?,
        published: state(&inst, &attacker, &published_config(profile))?,
        planned: state(&inst, &attacker, &planned.config)?,
        approximation: state(&inst, &attacker, &approx.config)?,
    })
}

impl CaseStudyReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "profile {}  budget {}", self.profile.name(), self.budget);
        let _ = writeln!(s, "{:<14} {:<16} {:>8} {:>8} {:>6}  changes", "plan", "attacked", "loss", "exact", "cost");
        for (label, st) in [
            ("none", &self.before),
            ("published", &self.published),
            ("optimal", &self.planned),
            ("approximation", &self.approximation),
        ] {
            let attacked = format!(
                "{{{}}}",
                st.attacked.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
            );
            let changes = st
                .changes
                .iter()
                .map(|c| format!("{}:{}={}", c.node, c.feature, c.to))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                s,
                "{label:<14} {attacked:<16} {:>8.4} {:>8} {:>6}  {}",
                st.loss,
                st.loss_exact,
                st.cost,
                if changes.is_empty() { "-".to_string() } else { changes }
            );
        }
        s
    }
}
