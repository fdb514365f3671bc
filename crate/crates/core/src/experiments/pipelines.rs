//! Replicated learning, planning and poisoning experiments.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_instance, generate_truth_model, random_configs, simulate_dataset, InstanceFamily, InstanceGenSpec, TRUTH_WEIGHT_RANGE};
use crate::attacker::{ModelFamily, ScoreModel};
use crate::dataset::AttackDataset;
use crate::error::{FdpError, Result};
use crate::instance::{expected_loss, FdpInstance, FeatureConfig};
use crate::learning::{
    classical_multiplicative_error, closed_form_learn, mle_learn, param_l1_error, poison_dataset_with_pairs, tv_error,
    ClosedFormOptions, MleHyper, PoisonStrategy,
};
use crate::planning::{
    brute_force_plan, plan_exact_discrete_cost, plan_gradient, plan_greedy, plan_milp, plan_milp_bs, plan_unconstrained,
    BruteForceOptions, GradientHyper, PlanResult,
};
use crate::rng::derive_seed;

/// Default number of replications per grid point.
pub const DEFAULT_REPLICATIONS: usize = 20;
/// Default size of the held-out configuration set for TV error.
pub const DEFAULT_TEST_CONFIGS: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub param: f64,
    pub mean: f64,
    pub std: f64,
    pub n_reps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        if self.rows.is_empty() {
            out.write_record(["param", "mean", "std", "n_reps"])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        l if l % 2 == 1 => v[l / 2],
        l => 0.5 * (v[l / 2 - 1] + v[l / 2]),
    }
}

/// Paired t statistic of `a - b`. Needs at least two pairs with nonzero
/// spread.
pub fn paired_t_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FdpError::dims("paired samples", a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(FdpError::Precondition("a paired t statistic needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, std) = mean_std(&d);
    if std == 0.0 {
        return Err(FdpError::Precondition("paired differences have zero spread".into()));
    }
    Ok(mean / (std / (d.len() as f64).sqrt()))
}

/// One replication at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub param: f64,
    pub replication: usize,
    /// The metric aggregated into the table.
    pub value: f64,
    pub details: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    /// Ordered by grid point, then replication.
    pub trials: Vec<Trial>,
}

impl ExperimentOutput {
    fn from_trials(grid: &[f64], trials: Vec<Trial>) -> Self {
        let rows = grid
            .iter()
            .map(|&p| {
                let v: Vec<f64> = trials.iter().filter(|t| t.param == p).map(|t| t.value).collect();
                let (mean, std) = mean_std(&v);
                ResultRow {
                    param: p,
                    mean,
                    std,
                    n_reps: v.len(),
                }
            })
            .collect();
        Self {
            table: ResultTable { rows },
            trials,
        }
    }

    /// `param,replication,value` rows, one per trial.
    pub fn write_trials_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["param", "replication", "value"])?;
        for t in &self.trials {
            out.write_record([t.param.to_string(), t.replication.to_string(), t.value.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn values_at(&self, param: f64) -> Vec<f64> {
        self.trials.iter().filter(|t| t.param == param).map(|t| t.value).collect()
    }
}

/// Runs `f(grid index, replication)` for every pair, in parallel, and returns
/// the trials in grid-major order.
fn run_grid<F>(grid: &[f64], replications: usize, f: F) -> Result<ExperimentOutput>
where
    F: Fn(usize, usize) -> Result<Trial> + Sync,
{
    if grid.is_empty() {
        return Err(FdpError::Precondition("the parameter grid is empty".into()));
    }
    if replications == 0 {
        return Err(FdpError::Precondition("at least one replication is needed".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..replications).map(move |r| (g, r))).collect();
    let trials = jobs.par_iter().map(|&(g, r)| f(g, r)).collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput::from_trials(grid, trials))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerChoice {
    /// Linear-system estimator on `m` configurations (classical only).
    ClosedForm {
        #[serde(default)]
        smoothing: bool,
    },
    /// Maximum likelihood by RMSProp.
    Mle(MleHyper),
}

impl LearnerChoice {
    /// Draws a training set of `samples` observations: `m` configurations
    /// with `samples / m` draws each for the closed form, `samples`
    /// configurations with one draw each for maximum likelihood.
    pub fn training_set(&self, truth: &ScoreModel, n: usize, m: usize, samples: usize, seed: u64) -> Result<AttackDataset> {
        let (count, per) = match self {
            LearnerChoice::ClosedForm { .. } => (m, samples / m),
            LearnerChoice::Mle(_) => (samples, 1),
        };
        if per == 0 || count == 0 {
            return Err(FdpError::OutOfRange {
                name: "samples",
                value: samples as f64,
                expected: "at least m for the closed form and at least 1 otherwise",
            });
        }
        let configs = random_configs(n, m, count, derive_seed(seed, 0));
        simulate_dataset(truth, &configs, per, derive_seed(seed, 1))
    }

    pub fn learn(&self, dataset: &AttackDataset, family: ModelFamily) -> Result<ScoreModel> {
        Ok(match self {
            LearnerChoice::ClosedForm { smoothing } => {
                if family != ModelFamily::Classical {
                    return Err(FdpError::Precondition("the closed-form learner fits classical models only".into()));
                }
                let opts = ClosedFormOptions {
                    smoothing: *smoothing,
                    ..Default::default()
                };
                closed_form_learn(dataset, &opts)?.model
            }
            LearnerChoice::Mle(h) => mle_learn(dataset, family, h)?.model,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerChoice {
    MilpBs { epsilon: f64, eps_bs: f64 },
    Milp { epsilon: f64 },
    Greedy,
    Gradient(GradientHyper),
    BruteForce { grid_step: f64 },
    ExactDiscreteCost,
    Unconstrained,
}

fn weights_of<'a>(model: &'a ScoreModel, planner: &str) -> Result<&'a [f64]> {
    match model {
        ScoreModel::Classical { weights } => Ok(weights),
        _ => Err(FdpError::Precondition(format!("{planner} needs a classical score model"))),
    }
}

impl PlannerChoice {
    pub fn plan(&self, instance: &FdpInstance, model: &ScoreModel) -> Result<PlanResult> {
        match self {
            PlannerChoice::MilpBs { epsilon, eps_bs } => plan_milp_bs(instance, weights_of(model, "milp-bs")?, *epsilon, *eps_bs),
            PlannerChoice::Milp { epsilon } => plan_milp(instance, weights_of(model, "milp")?, *epsilon),
            PlannerChoice::Greedy => plan_greedy(instance, model),
            PlannerChoice::Gradient(h) => plan_gradient(instance, model, h),
            PlannerChoice::BruteForce { grid_step } => brute_force_plan(
                instance,
                model,
                &BruteForceOptions {
                    grid_step: *grid_step,
                    ..Default::default()
                },
            ),
            PlannerChoice::ExactDiscreteCost => plan_exact_discrete_cost(instance, weights_of(model, "exact")?),
            PlannerChoice::Unconstrained => plan_unconstrained(instance, weights_of(model, "unconstrained")?),
        }
    }

    /// Reference planner against the true model: binary-search MILP for
    /// classical attackers, gradient descent for the network.
    pub fn reference_for(family: ModelFamily) -> Self {
        match family {
            ModelFamily::Classical => PlannerChoice::MilpBs {
                epsilon: 0.005,
                eps_bs: 1e-4,
            },
            ModelFamily::Neural3 => PlannerChoice::Gradient(GradientHyper::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveSpec {
    pub family: ModelFamily,
    pub n: usize,
    pub m: usize,
    /// Total training observations per grid point.
    pub sample_grid: Vec<usize>,
    pub replications: usize,
    pub test_configs: usize,
    /// Used for the network; the classical family uses the closed form.
    pub hyper: MleHyper,
    pub seed: u64,
}

/// TV error of the learned model against a random truth, per sample size.
/// Replication `r` draws its truth from `derive_seed(seed, r)` and keeps it
/// across the grid. Details: `param_l1`.
pub fn run_learning_curve(spec: &LearningCurveSpec) -> Result<ExperimentOutput> {
    let learner = match spec.family {
        ModelFamily::Classical => LearnerChoice::ClosedForm { smoothing: false },
        ModelFamily::Neural3 => LearnerChoice::Mle(spec.hyper.clone()),
    };
    let grid: Vec<f64> = spec.sample_grid.iter().map(|&d| d as f64).collect();
    run_grid(&grid, spec.replications, |g, r| {
        let rep_seed = derive_seed(spec.seed, r as u64);
        let truth = generate_truth_model(spec.family, spec.m, derive_seed(rep_seed, 0));
        let test = random_configs(spec.n, spec.m, spec.test_configs.max(1), derive_seed(rep_seed, 1));
        let data = learner.training_set(&truth, spec.n, spec.m, spec.sample_grid[g], derive_seed(rep_seed, 2 + g as u64))?;
        let learned = learner.learn(&data, spec.family)?;
        let mut details = BTreeMap::new();
        details.insert("param_l1".into(), param_l1_error(&truth, &learned)?);
        Ok(Trial {
            param: grid[g],
            replication: r,
            value: tv_error(&truth, &learned, &test)?,
            details,
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndToEndSpec {
    pub instance_family: InstanceFamily,
    pub n: usize,
    pub m: usize,
    pub sample_grid: Vec<usize>,
    pub learner: LearnerChoice,
    pub planner: PlannerChoice,
    /// Planner run on the true model; defaults per family when absent.
    pub reference: Option<PlannerChoice>,
    pub replications: usize,
    pub seed: u64,
}

/// Outcome of planning with a learned model, judged by the true model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapOutcome {
    /// `(U(x) - U(x_ref)) / U(x_ref)` under the true model.
    pub relative_gap: f64,
    /// `U(x) - U(x_ref)` under the true model.
    pub excess_loss: f64,
    pub loss: f64,
    pub reference_loss: f64,
    /// Additive certificate of the planner on its own model, if any.
    pub certificate: Option<f64>,
}

/// Plans with `learned`, plans with `truth` using `reference`, and compares
/// both plans under `truth`.
pub fn solution_gap(
    instance: &FdpInstance,
    truth: &ScoreModel,
    learned: &ScoreModel,
    planner: &PlannerChoice,
    reference: &PlannerChoice,
) -> Result<GapOutcome> {
    let plan = planner.plan(instance, learned)?;
    let reference_plan = reference.plan(instance, truth)?;
    gap_between(instance, truth, &plan.config, &reference_plan.config, plan.bound)
}

pub fn gap_between(
    instance: &FdpInstance,
    truth: &ScoreModel,
    config: &FeatureConfig,
    reference: &FeatureConfig,
    certificate: Option<f64>,
) -> Result<GapOutcome> {
    let loss = expected_loss(instance, truth, config)?;
    let reference_loss = expected_loss(instance, truth, reference)?;
    Ok(GapOutcome {
        relative_gap: (loss - reference_loss) / reference_loss,
        excess_loss: loss - reference_loss,
        loss,
        reference_loss,
        certificate,
    })
}

/// Solution gap of learn-then-plan against planning with the truth.
/// Details: `excess_loss`, `loss`, `reference_loss`, `certificate` (when the
/// planner has one) and `multiplicative_error` (classical models).
pub fn run_end_to_end(spec: &EndToEndSpec) -> Result<ExperimentOutput> {
    let family = spec.instance_family.model_family();
    let reference = spec.reference.clone().unwrap_or_else(|| PlannerChoice::reference_for(family));
    let grid: Vec<f64> = spec.sample_grid.iter().map(|&d| d as f64).collect();
    run_grid(&grid, spec.replications, |g, r| {
        let rep_seed = derive_seed(spec.seed, r as u64);
        let instance = generate_instance(&InstanceGenSpec {
            n: spec.n,
            m: spec.m,
            family: spec.instance_family,
            seed: derive_seed(rep_seed, 0),
        })?;
        let truth = generate_truth_model(family, spec.m, derive_seed(rep_seed, 1));
        let data = spec
            .learner
            .training_set(&truth, spec.n, spec.m, spec.sample_grid[g], derive_seed(rep_seed, 2 + g as u64))?;
        let learned = spec.learner.learn(&data, family)?;
        let out = solution_gap(&instance, &truth, &learned, &spec.planner, &reference)?;
        let mut details = BTreeMap::new();
        details.insert("excess_loss".into(), out.excess_loss);
        details.insert("loss".into(), out.loss);
        details.insert("reference_loss".into(), out.reference_loss);
        if let Some(c) = out.certificate {
            details.insert("certificate".into(), c);
        }
        if let (ScoreModel::Classical { weights: a }, ScoreModel::Classical { weights: b }) = (&truth, &learned) {
            details.insert("multiplicative_error".into(), classical_multiplicative_error(a, b)?);
        }
        Ok(Trial {
            param: grid[g],
            replication: r,
            value: out.relative_gap,
            details,
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoisoningSpec {
    pub n: usize,
    pub m: usize,
    pub gammas: Vec<f64>,
    /// Target accuracy; the bound checked is a multiplicative error of `3ε`.
    pub epsilon: f64,
    pub samples_per_config: usize,
    pub replications: usize,
    pub strategy: PoisonStrategy,
    pub seed: u64,
}

/// Training configurations whose feature difference matrix is the identity:
/// in configuration `j`, target 0 shows the unit vector `e_j` and every other
/// target shows zeros. The estimator pair is `(0, 1)` in every group.
pub fn identity_design(n: usize, m: usize) -> Result<(Vec<FeatureConfig>, Vec<(usize, usize)>)> {
    if n < 2 || m == 0 {
        return Err(FdpError::Precondition("the identity design needs n ≥ 2 and m ≥ 1".into()));
    }
    let configs = (0..m)
        .map(|j| {
            let mut c = FeatureConfig::zeros(n, m);
            c.set(0, j, 1.0);
            c
        })
        .collect();
    Ok((configs, vec![(0, 1); m]))
}

/// Lower bound on the smallest attack probability of the identity design
/// over all classical truths with weights in `[-0.5, 0.5]`.
pub fn identity_design_min_probability(n: usize) -> f64 {
    let a = TRUTH_WEIGHT_RANGE;
    let others = (n - 1) as f64;
    let low_first = (-a).exp() / ((-a).exp() + others);
    let low_other = 1.0 / (a.exp() + others);
    low_first.min(low_other)
}

/// Largest poisoning rate covered by the robustness guarantee:
/// `ε ρ / (4 α m)`.
pub fn poisoning_regime_limit(epsilon: f64, rho: f64, alpha: f64, m: usize) -> f64 {
    epsilon * rho / (4.0 * alpha * m as f64)
}

/// Multiplicative error of the closed form on poisoned identity-design data,
/// per poisoning rate. Details: `in_regime` and `within_bound` (0 or 1),
/// `regime_limit`.
pub fn run_poisoning_experiment(spec: &PoisoningSpec) -> Result<ExperimentOutput> {
    let (configs, pairs) = identity_design(spec.n, spec.m)?;
    let limit = poisoning_regime_limit(spec.epsilon, identity_design_min_probability(spec.n), 1.0, spec.m);
    run_grid(&spec.gammas, spec.replications, |g, r| {
        let gamma = spec.gammas[g];
        let rep_seed = derive_seed(spec.seed, r as u64);
        let truth = generate_truth_model(ModelFamily::Classical, spec.m, derive_seed(rep_seed, 0));
        let clean = simulate_dataset(&truth, &configs, spec.samples_per_config, derive_seed(rep_seed, 1))?;
        let poisoned = poison_dataset_with_pairs(&clean, gamma, spec.strategy, derive_seed(rep_seed, 2 + g as u64), &pairs)?;
        let opts = ClosedFormOptions {
            pairs: Some(pairs.clone()),
            smoothing: true,
            epsilon: spec.epsilon,
            ..Default::default()
        };
        let learned = closed_form_learn(&poisoned, &opts)?.model;
        let (ScoreModel::Classical { weights: a }, ScoreModel::Classical { weights: b }) = (&truth, &learned) else {
            unreachable!("closed form returns classical models")
        };
        let err = classical_multiplicative_error(a, b)?;
        let mut details = BTreeMap::new();
        details.insert("in_regime".into(), f64::from(u8::from(gamma <= limit)));
        details.insert("within_bound".into(), f64::from(u8::from(err <= 3.0 * spec.epsilon)));
        details.insert("regime_limit".into(), limit);
        Ok(Trial {
            param: gamma,
            replication: r,
            value: err,
            details,
        })
    })
}

/// Run record written next to every result file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub spec: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, spec: serde_json::Value) -> Self {
        Self {
            tool: "fdpkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            spec,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
