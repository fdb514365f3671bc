//! Estimating attacker score models from attack logs.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacker::{log_likelihood, log_likelihood_grad, ModelFamily, Neural3, ScoreModel};
use crate::dataset::{AttackDataset, AttackGroup};
use crate::error::{FdpError, Result};
use crate::instance::FeatureConfig;
use crate::rng::rng_from_seed;

/// Condition estimates above this reject the difference system.
pub const CONDITION_LIMIT: f64 = 1e10;

/// The square system `A w = b` built from one target pair per configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDifferenceSystem {
    /// Row `g` is `x_s − x_t` under configuration `g`.
    pub a: Vec<Vec<f64>>,
    /// `ln(P(s) / P(t))` under configuration `g`.
    pub b: Vec<f64>,
    pub pairs: Vec<(usize, usize)>,
    /// Induced 1-norm of `A⁻¹`.
    pub alpha: f64,
    /// `‖A‖₁ ‖A⁻¹‖₁`.
    pub condition: f64,
}

impl FeatureDifferenceSystem {
    fn build(configs: &[&FeatureConfig], b: Vec<f64>, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let m = configs.len();
        let a: Vec<Vec<f64>> = configs
            .iter()
            .zip(&pairs)
            .map(|(c, &(s, t))| c.row(s).iter().zip(c.row(t)).map(|(p, q)| p - q).collect())
            .collect();
        let mat = DMatrix::from_fn(m, m, |r, c| a[r][c]);
        let inv = mat.clone().try_inverse();
        let norm1 = |x: &DMatrix<f64>| {
            x.column_iter()
                .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let (alpha, condition) = match &inv {
            Some(inv) if inv.iter().all(|v| v.is_finite()) => {
                let alpha = norm1(inv);
                (alpha, norm1(&mat) * alpha)
            }
            _ => (f64::INFINITY, f64::INFINITY),
        };
        if !(condition <= CONDITION_LIMIT) {
            return Err(FdpError::SingularSystem {
                rows: dependent_rows(&a),
                condition,
            });
        }
        Ok(Self {
            a,
            b,
            pairs,
            alpha,
            condition,
        })
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        let m = self.a.len();
        let mat = DMatrix::from_fn(m, m, |r, c| self.a[r][c]);
        let rhs = DVector::from_column_slice(&self.b);
        let w = mat.lu().solve(&rhs).ok_or_else(|| FdpError::SingularSystem {
            rows: dependent_rows(&self.a),
            condition: self.condition,
        })?;
        Ok(w.iter().copied().collect())
    }

    pub fn residual_inf(&self, w: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, b)| (row.iter().zip(w).map(|(a, x)| a * x).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Rows that are (numerically) linear combinations of earlier rows.
fn dependent_rows(a: &[Vec<f64>]) -> Vec<usize> {
    let cols = a.first().map_or(0, Vec::len);
    let mut kept: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for r in 0..a.len() {
        let mut trial = kept.clone();
        trial.push(r);
        let mat = DMatrix::from_fn(trial.len(), cols, |i, j| a[trial[i]][j]);
        let scale = mat.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        if mat.rank(1e-10 * scale) == trial.len() {
            kept.push(r);
        } else {
            out.push(r);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleComplexityReport {
    pub n: usize,
    pub m: usize,
    pub rho_hat: f64,
    pub alpha_hat: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// `α⁴ m⁴ / (ρ ε²) · ln(nm/δ)` per configuration, leading constant 1.
    pub required_samples: f64,
    pub available_samples: Option<usize>,
    pub note: String,
}

impl SampleComplexityReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "samples per configuration for multiplicative error {} with confidence {}: {:.4e} (up to constant factors)\n\
             alpha = {:.6}, rho = {:.6}, n = {}, m = {}\n",
            self.epsilon,
            1.0 - self.delta,
            self.required_samples,
            self.alpha_hat,
            self.rho_hat,
            self.n,
            self.m
        );
        if let Some(a) = self.available_samples {
            s.push_str(&format!("available per configuration (min over groups): {a}\n"));
        }
        s
    }
}

pub fn sample_complexity(
    n: usize,
    m: usize,
    rho_hat: f64,
    alpha_hat: f64,
    epsilon: f64,
    delta: f64,
) -> Result<SampleComplexityReport> {
    if !(rho_hat > 0.0 && rho_hat <= 1.0) {
        return Err(FdpError::OutOfRange {
            name: "rho",
            value: rho_hat,
            expected: "in (0, 1]",
        });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(FdpError::OutOfRange {
            name: "epsilon",
            value: epsilon,
            expected: "in (0, 1)",
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(FdpError::OutOfRange {
            name: "delta",
            value: delta,
            expected: "in (0, 1)",
        });
    }
    if !(alpha_hat.is_finite() && alpha_hat > 0.0) || n == 0 || m == 0 {
        return Err(FdpError::Precondition("alpha must be finite and positive, n and m nonzero".into()));
    }
    let (mf, nf) = (m as f64, n as f64);
    let required = alpha_hat.powi(4) * mf.powi(4) / (rho_hat * epsilon * epsilon) * (nf * mf / delta).ln();
    Ok(SampleComplexityReport {
        n,
        m,
        rho_hat,
        alpha_hat,
        epsilon,
        delta,
        required_samples: required,
        available_samples: None,
        note: "bound evaluated with leading constant 1 and natural log; valid up to constant factors".into(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnDiagnostics {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_log_likelihood: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnResult {
    pub model: ScoreModel,
    pub diagnostics: LearnDiagnostics,
    pub report: Option<SampleComplexityReport>,
}

impl LearnResult {
    /// The model document with `diagnostics` (and `report`) keys added.
    pub fn to_json_string(&self) -> Result<String> {
        let mut v = serde_json::to_value(&self.model)?;
        if let Some(obj) = v.as_object_mut() {
            obj.insert("diagnostics".into(), serde_json::to_value(&self.diagnostics)?);
            if let Some(r) = &self.report {
                obj.insert("report".into(), serde_json::to_value(r)?);
            }
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(s)?;
        let obj = v
            .as_object_mut()
            .ok_or_else(|| FdpError::InvalidModel("expected a JSON object".into()))?;
        let diagnostics = match obj.remove("diagnostics") {
            Some(d) => serde_json::from_value(d)?,
            None => LearnDiagnostics::default(),
        };
        let report = match obj.remove("report") {
            Some(r) => Some(serde_json::from_value(r)?),
            None => None,
        };
        let model: ScoreModel = serde_json::from_value(v)?;
        model.validate()?;
        Ok(Self {
            model,
            diagnostics,
            report,
        })
    }
}

/// Reads either a bare model document or a learn-result document.
pub fn model_from_json_str(s: &str) -> Result<ScoreModel> {
    Ok(LearnResult::from_json_str(s)?.model)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosedFormOptions {
    /// One `(s, t)` pair per group; `None` picks the two most attacked targets.
    pub pairs: Option<Vec<(usize, usize)>>,
    /// Add one to every count before forming frequencies.
    pub smoothing: bool,
    /// Accuracy and confidence used for the attached sample-complexity report.
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for ClosedFormOptions {
    fn default() -> Self {
        Self {
            pairs: None,
            smoothing: false,
            epsilon: 0.1,
            delta: 0.05,
        }
    }
}

/// The two most attacked targets, ties broken by lower index.
pub fn default_pair(counts: &[usize]) -> (usize, usize) {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    (order[0], order.get(1).copied().unwrap_or(order[0]))
}

/// Solves the feature difference system built from empirical frequencies.
/// Needs exactly `m` groups.
pub fn closed_form_learn(dataset: &AttackDataset, opts: &ClosedFormOptions) -> Result<LearnResult> {
    let (n, m) = (dataset.n(), dataset.m());
    if n < 2 {
        return Err(FdpError::Precondition("closed-form learning needs at least two targets".into()));
    }
    if dataset.groups().len() != m {
        return Err(FdpError::InvalidDataset(format!(
            "closed-form learning needs exactly m = {m} configuration groups, found {}",
            dataset.groups().len()
        )));
    }
    if let Some(p) = &opts.pairs {
        if p.len() != m {
            return Err(FdpError::dims("pairs", m, p.len()));
        }
    }
    let mut pairs = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut rho = f64::INFINITY;
    let mut min_size = usize::MAX;
    for (g, group) in dataset.groups().iter().enumerate() {
        let counts = group.counts(n);
        let (s, t) = match &opts.pairs {
            Some(p) => p[g],
            None => default_pair(&counts),
        };
        if s >= n || t >= n || s == t {
            return Err(FdpError::Precondition(format!("group {g}: pair ({s}, {t}) is not two distinct targets")));
        }
        let add = if opts.smoothing { 1.0 } else { 0.0 };
        let total = group.targets.len() as f64 + add * n as f64;
        for &target in &[s, t] {
            if counts[target] == 0 && !opts.smoothing {
                return Err(FdpError::PairSelection { group: g, target });
            }
        }
        let freq = |i: usize| (counts[i] as f64 + add) / total;
        b.push((freq(s) / freq(t)).ln());
        pairs.push((s, t));
        rho = rho.min((0..n).map(freq).fold(f64::INFINITY, f64::min));
        min_size = min_size.min(group.targets.len());
    }
    let configs: Vec<&FeatureConfig> = dataset.groups().iter().map(|g| &g.config).collect();
    let system = FeatureDifferenceSystem::build(&configs, b, pairs)?;
    let w = system.solve()?;
    let residual = system.residual_inf(&w);
    let report = if rho > 0.0 {
        sample_complexity(n, m, rho, system.alpha, opts.epsilon, opts.delta)
            .ok()
            .map(|mut r| {
                r.available_samples = Some(min_size);
                r
            })
    } else {
        None
    };
    Ok(LearnResult {
        model: ScoreModel::classical(w),
        diagnostics: LearnDiagnostics {
            method: "closed_form".into(),
            residual_inf: Some(residual),
            pair_rule: Some(if opts.pairs.is_some() { "user" } else { "two most attacked targets per group" }.into()),
            pairs: Some(system.pairs.clone()),
            condition: Some(system.condition),
            ..Default::default()
        },
        report,
    })
}

/// Closed-form solve with exact attack distributions in place of empirical
/// frequencies.
pub fn closed_form_from_distributions(
    configs: &[FeatureConfig],
    distributions: &[Vec<f64>],
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let m = configs.len();
    if distributions.len() != m || pairs.len() != m {
        return Err(FdpError::dims("distributions and pairs", m, distributions.len().min(pairs.len())));
    }
    let mut b = Vec::with_capacity(m);
    for (g, (p, &(s, t))) in distributions.iter().zip(pairs).enumerate() {
        if configs[g].m() != m {
            return Err(FdpError::dims("configuration features", m, configs[g].m()));
        }
        if p[s] <= 0.0 {
            return Err(FdpError::PairSelection { group: g, target: s });
        }
        if p[t] <= 0.0 {
            return Err(FdpError::PairSelection { group: g, target: t });
        }
        b.push((p[s] / p[t]).ln());
    }
    let refs: Vec<&FeatureConfig> = configs.iter().collect();
    FeatureDifferenceSystem::build(&refs, b, pairs.to_vec())?.solve()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Defaults to `|D| / epochs`.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for MleHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 20,
            steps_per_epoch: 10,
            batch_size: None,
            seed: 0,
        }
    }
}

/// Initial model used by [`mle_learn`]: zero weights for the classical
/// family, uniform `[-0.5, 0.5]` parameters for the network.
pub fn initial_model(family: ModelFamily, m: usize, seed: u64) -> ScoreModel {
    match family {
        ModelFamily::Classical => ScoreModel::classical(vec![0.0; m]),
        ModelFamily::Neural3 => ScoreModel::Neural3(Neural3::random(m, &mut rng_from_seed(seed))),
    }
}

/// Maximum likelihood by RMSProp ascent on mini-batches. The returned model is
/// the best (by full log-likelihood) seen at any epoch boundary, including the
/// initialization.
pub fn mle_learn(dataset: &AttackDataset, family: ModelFamily, hyper: &MleHyper) -> Result<LearnResult> {
    let init = initial_model(family, dataset.m(), hyper.seed);
    mle_learn_from(dataset, init, hyper)
}

pub fn mle_learn_from(dataset: &AttackDataset, init: ScoreModel, hyper: &MleHyper) -> Result<LearnResult> {
    init.check_features(dataset.m())?;
    let total = dataset.num_observations();
    if total == 0 {
        return Err(FdpError::EmptyDataset);
    }
    if !(hyper.learning_rate >= 0.0 && hyper.learning_rate.is_finite()) {
        return Err(FdpError::OutOfRange {
            name: "learning_rate",
            value: hyper.learning_rate,
            expected: "finite and nonnegative",
        });
    }
    let mut obs: Vec<(usize, usize)> = Vec::with_capacity(total);
    for (g, group) in dataset.groups().iter().enumerate() {
        obs.extend((0..group.targets.len()).map(|j| (g, j)));
    }
    let epochs = hyper.epochs.max(1);
    let batch = hyper.batch_size.unwrap_or(total / epochs).clamp(1, total);
    let mut rng = rng_from_seed(hyper.seed ^ 0x6d6c_655f_6c65_6172);

    let mut model = init.clone();
    let mut theta = model.params().expect("differentiable family");
    let mut sq = vec![0.0; theta.len()];
    let init_ll = log_likelihood(&model, dataset)?;
    if !init_ll.is_finite() {
        return Err(FdpError::TrainingDiverged {
            epoch: 0,
            step: 0,
            last_finite: f64::NAN,
        });
    }
    let (mut best_ll, mut best_model, mut best_epoch) = (init_ll, init.clone(), 0);
    let mut last_finite = init_ll;
    let mut cursor = total;
    let mut buf: Vec<(usize, usize)> = Vec::with_capacity(batch);

    if hyper.learning_rate > 0.0 {
        for epoch in 1..=epochs {
            for step in 0..hyper.steps_per_epoch {
                buf.clear();
                while buf.len() < batch {
                    if cursor >= total {
                        obs.shuffle(&mut rng);
                        cursor = 0;
                    }
                    let take = (batch - buf.len()).min(total - cursor);
                    buf.extend_from_slice(&obs[cursor..cursor + take]);
                    cursor += take;
                }
                buf.sort_unstable();
                let (ll, grad) = log_likelihood_grad(&model, dataset, Some(&buf))?;
                if !ll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(FdpError::TrainingDiverged { epoch, step, last_finite });
                }
                let scale = 1.0 / buf.len() as f64;
                for ((p, s), g) in theta.iter_mut().zip(sq.iter_mut()).zip(&grad) {
                    let g = g * scale;
                    *s = 0.9 * *s + 0.1 * g * g;
                    *p += hyper.learning_rate * g / (s.sqrt() + 1e-8);
                }
                model = model.with_params(theta.clone())?;
            }
            let ll = log_likelihood(&model, dataset)?;
            if !ll.is_finite() {
                return Err(FdpError::TrainingDiverged {
                    epoch,
                    step: hyper.steps_per_epoch,
                    last_finite,
                });
            }
            last_finite = ll;
            log::debug!("epoch {epoch}: log-likelihood {ll:.6}");
            if ll > best_ll {
                best_ll = ll;
                best_model = model.clone();
                best_epoch = epoch;
            }
        }
    }
    Ok(LearnResult {
        model: best_model,
        diagnostics: LearnDiagnostics {
            method: match init.family() {
                Some(ModelFamily::Neural3) => "mle_neural3",
                _ => "mle_classical",
            }
            .into(),
            log_likelihood: Some(best_ll),
            initial_log_likelihood: Some(init_ll),
            best_epoch: Some(best_epoch),
            ..Default::default()
        },
        report: None,
    })
}

/// Mean total-variation distance between induced attack distributions.
pub fn tv_error(a: &ScoreModel, b: &ScoreModel, configs: &[FeatureConfig]) -> Result<f64> {
    if configs.is_empty() {
        return Err(FdpError::Precondition("tv_error needs at least one test configuration".into()));
    }
    let mut total = 0.0;
    for c in configs {
        let (p, q) = (a.attack_distribution(c)?, b.attack_distribution(c)?);
        total += 0.5 * p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum::<f64>();
    }
    Ok(total / configs.len() as f64)
}

/// Mean absolute difference of aligned parameters.
pub fn param_l1_error(a: &ScoreModel, b: &ScoreModel) -> Result<f64> {
    if a.family() != b.family() || a.family().is_none() {
        return Err(FdpError::InvalidModel("parameter error needs two models of one differentiable family".into()));
    }
    let (pa, pb) = (a.params().unwrap_or_default(), b.params().unwrap_or_default());
    if pa.len() != pb.len() {
        return Err(FdpError::dims("parameter vectors", pa.len(), pb.len()));
    }
    Ok(pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / pa.len() as f64)
}

/// Smallest `ε` with `1/(1+ε) ≤ f(x)/f̂(x) ≤ 1+ε` on the whole unit cube, for
/// two classical weight vectors.
pub fn classical_multiplicative_error(truth: &[f64], learned: &[f64]) -> Result<f64> {
    if truth.len() != learned.len() {
        return Err(FdpError::dims("weight vectors", truth.len(), learned.len()));
    }
    let (mut pos, mut neg) = (0.0, 0.0);
    for (w, v) in truth.iter().zip(learned) {
        let d = v - w;
        if d > 0.0 {
            pos += d;
        } else {
            neg -= d;
        }
    }
    Ok(f64::max(pos, neg).exp() - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoisonStrategy {
    WorstCasePair,
    RandomFlip,
}

/// Relabels `⌊γ · |group|⌋` observations in every group. The worst-case
/// strategy moves attacks from the second most attacked target to the most
/// attacked one (the default estimator pair).
pub fn poison_dataset(dataset: &AttackDataset, gamma: f64, strategy: PoisonStrategy, seed: u64) -> Result<AttackDataset> {
    let pairs: Vec<(usize, usize)> = dataset
        .groups()
        .iter()
        .map(|g| default_pair(&g.counts(dataset.n())))
        .collect();
    poison_dataset_with_pairs(dataset, gamma, strategy, seed, &pairs)
}

/// As [`poison_dataset`], with the worst-case pair `(s, t)` given per group
/// (attacks move from `t` to `s`).
pub fn poison_dataset_with_pairs(
    dataset: &AttackDataset,
    gamma: f64,
    strategy: PoisonStrategy,
    seed: u64,
    pairs: &[(usize, usize)],
) -> Result<AttackDataset> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(FdpError::OutOfRange {
            name: "gamma",
            value: gamma,
            expected: "in [0, 1]",
        });
    }
    if pairs.len() != dataset.groups().len() {
        return Err(FdpError::dims("poisoning pairs", dataset.groups().len(), pairs.len()));
    }
    let n = dataset.n();
    let mut rng = rng_from_seed(seed);
    let mut groups = Vec::with_capacity(dataset.groups().len());
    for (group, &(s, t)) in dataset.groups().iter().zip(pairs) {
        let mut targets = group.targets.clone();
        let k = (gamma * targets.len() as f64 + 1e-9).floor() as usize;
        if n >= 2 && k > 0 {
            match strategy {
                PoisonStrategy::WorstCasePair => {
                    let from_t = targets.iter().enumerate().filter(|(_, &y)| y == t).map(|(j, _)| j);
                    let others = targets.iter().enumerate().filter(|(_, &y)| y != t && y != s).map(|(j, _)| j);
                    let chosen: Vec<usize> = from_t.chain(others).take(k).collect();
                    for j in chosen {
                        targets[j] = s;
                    }
                    // groups with almost everything on s already cannot change further
                }
                PoisonStrategy::RandomFlip => {
                    for j in sample_indices(&mut rng, targets.len(), k.min(targets.len())) {
                        let shift = rng.gen_range(1..n);
                        targets[j] = (targets[j] + shift) % n;
                    }
                }
            }
        }
        groups.push(AttackGroup {
            config: group.config.clone(),
            targets,
        });
    }
    Ok(dataset.with_groups(groups))
}
