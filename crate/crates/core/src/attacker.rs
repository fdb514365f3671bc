//! Attacker score models and the attack distributions they induce.
//!
//! Given observed rows `x_1..x_n`, a score model assigns each target a positive
//! score `f(x_i)` and the attacker picks target `i` with probability
//! `f(x_i) / Σ_j f(x_j)`. Differentiable models are handled in log space
//! (`g = ln f`) with max-subtraction, so large weights do not overflow.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::AttackDataset;
use crate::error::{FdpError, Result};
use crate::instance::{FeatureConfig, FEASIBILITY_TOL};
use crate::rng::{rng_from_seed, FdpRng};

pub const HIDDEN1: usize = 24;
pub const HIDDEN2: usize = 12;

/// `(feature index, required value)` for a requirement-rule attacker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirement {
    pub feature: usize,
    pub value: f64,
}

impl Requirement {
    pub fn new(feature: usize, value: f64) -> Self {
        Self { feature, value }
    }

    fn satisfied_by(&self, row: &[f64]) -> bool {
        (row[self.feature] - self.value).abs() <= FEASIBILITY_TOL
    }
}

/// Three-layer tanh network whose output is exponentiated to a score.
///
/// Parameters are stored flat: `W1` (m × 24, row-major by input), `b1` (24),
/// `W2` (24 × 12), `b2` (12), `W3` (12), `b3` (1).
#[derive(Clone, Debug, PartialEq)]
pub struct Neural3 {
    m: usize,
    params: Vec<f64>,
}

struct Activations {
    h1: [f64; HIDDEN1],
    h2: [f64; HIDDEN2],
    out: f64,
}

impl Neural3 {
    pub fn param_count(m: usize) -> usize {
        m * HIDDEN1 + HIDDEN1 + HIDDEN1 * HIDDEN2 + HIDDEN2 + HIDDEN2 + 1
    }

    pub fn from_params(m: usize, params: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(FdpError::InvalidModel("neural model needs m >= 1".into()));
        }
        if params.len() != Self::param_count(m) {
            return Err(FdpError::dims("neural parameters", Self::param_count(m), params.len()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(FdpError::InvalidModel("neural parameters must be finite".into()));
        }
        Ok(Self { m, params })
    }

    /// Parameters drawn uniformly from `[-0.5, 0.5]`.
    pub fn random(m: usize, rng: &mut FdpRng) -> Self {
        let params = (0..Self::param_count(m)).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        Self { m, params }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    fn offsets(&self) -> [usize; 6] {
        let w1 = 0;
        let b1 = w1 + self.m * HIDDEN1;
        let w2 = b1 + HIDDEN1;
        let b2 = w2 + HIDDEN1 * HIDDEN2;
        let w3 = b2 + HIDDEN2;
        let b3 = w3 + HIDDEN2;
        [w1, b1, w2, b2, w3, b3]
    }

    fn forward(&self, x: &[f64]) -> Activations {
        let p = &self.params;
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let mut h1 = [0.0; HIDDEN1];
        for (j, h) in h1.iter_mut().enumerate() {
            let mut s = p[b1 + j];
            for (i, &xi) in x.iter().enumerate() {
                s += xi * p[w1 + i * HIDDEN1 + j];
            }
            *h = s.tanh();
        }
        let mut h2 = [0.0; HIDDEN2];
        for (k, h) in h2.iter_mut().enumerate() {
            let mut s = p[b2 + k];
            for (j, &a) in h1.iter().enumerate() {
                s += a * p[w2 + j * HIDDEN2 + k];
            }
            *h = s.tanh();
        }
        let mut out = p[b3];
        for (k, &a) in h2.iter().enumerate() {
            out += a * p[w3 + k];
        }
        Activations { h1, h2, out }
    }

    /// Back-propagates `scale · ∂g/∂θ` into `grad` and returns `g`.
    fn accumulate_param_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let act = self.forward(x);
        self.backprop(x, &act, scale, grad);
        act.out
    }

    fn backprop(&self, x: &[f64], act: &Activations, scale: f64, grad: &mut [f64]) {
        let p = &self.params;
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        grad[b3] += scale;
        let mut d2 = [0.0; HIDDEN2];
        for k in 0..HIDDEN2 {
            grad[w3 + k] += scale * act.h2[k];
            d2[k] = scale * p[w3 + k] * (1.0 - act.h2[k] * act.h2[k]);
            grad[b2 + k] += d2[k];
        }
        for j in 0..HIDDEN1 {
            let mut back = 0.0;
            for k in 0..HIDDEN2 {
                grad[w2 + j * HIDDEN2 + k] += act.h1[j] * d2[k];
                back += p[w2 + j * HIDDEN2 + k] * d2[k];
            }
            let d1 = back * (1.0 - act.h1[j] * act.h1[j]);
            grad[b1 + j] += d1;
            for (i, &xi) in x.iter().enumerate() {
                grad[w1 + i * HIDDEN1 + j] += xi * d1;
            }
        }
    }

    fn input_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let act = self.forward(x);
        let p = &self.params;
        let [w1, _, w2, _, w3, _] = self.offsets();
        let mut d2 = [0.0; HIDDEN2];
        for k in 0..HIDDEN2 {
            d2[k] = p[w3 + k] * (1.0 - act.h2[k] * act.h2[k]);
        }
        let mut gx = vec![0.0; self.m];
        for j in 0..HIDDEN1 {
            let back: f64 = (0..HIDDEN2).map(|k| p[w2 + j * HIDDEN2 + k] * d2[k]).sum();
            let d1 = back * (1.0 - act.h1[j] * act.h1[j]);
            for (i, g) in gx.iter_mut().enumerate() {
                *g += p[w1 + i * HIDDEN1 + j] * d1;
            }
        }
        (act.out, gx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    /// `inputs × outputs`
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Neural3Doc {
    layer1: LayerDoc,
    layer2: LayerDoc,
    layer3: LayerDoc,
}

impl From<&Neural3> for Neural3Doc {
    fn from(net: &Neural3) -> Self {
        let p = &net.params;
        let [w1, b1, w2, b2, w3, b3] = net.offsets();
        let layer = |w: usize, rows: usize, cols: usize, b: usize| LayerDoc {
            weights: (0..rows).map(|r| p[w + r * cols..w + (r + 1) * cols].to_vec()).collect(),
            bias: p[b..b + cols].to_vec(),
        };
        Neural3Doc {
            layer1: layer(w1, net.m, HIDDEN1, b1),
            layer2: layer(w2, HIDDEN1, HIDDEN2, b2),
            layer3: layer(w3, HIDDEN2, 1, b3),
        }
    }
}

impl TryFrom<Neural3Doc> for Neural3 {
    type Error = FdpError;

    fn try_from(doc: Neural3Doc) -> Result<Self> {
        let m = doc.layer1.weights.len();
        let shape_ok = |l: &LayerDoc, rows: usize, cols: usize| {
            l.weights.len() == rows && l.weights.iter().all(|r| r.len() == cols) && l.bias.len() == cols
        };
        if m == 0
            || !shape_ok(&doc.layer1, m, HIDDEN1)
            || !shape_ok(&doc.layer2, HIDDEN1, HIDDEN2)
            || !shape_ok(&doc.layer3, HIDDEN2, 1)
        {
            return Err(FdpError::InvalidModel(format!(
                "neural layers must be m x {HIDDEN1}, {HIDDEN1} x {HIDDEN2}, {HIDDEN2} x 1"
            )));
        }
        let mut params = Vec::with_capacity(Neural3::param_count(m));
        for layer in [&doc.layer1, &doc.layer2, &doc.layer3] {
            for row in &layer.weights {
                params.extend_from_slice(row);
            }
            params.extend_from_slice(&layer.bias);
        }
        Neural3::from_params(m, params)
    }
}

impl Serialize for Neural3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Neural3Doc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Neural3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Neural3::try_from(Neural3Doc::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Attacker preference model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreModel {
    /// `f(x) = exp(Σ_k w_k x_k)`.
    Classical { weights: Vec<f64> },
    /// `f(x) = exp(NN(x))` with two tanh hidden layers (24 and 12 units).
    Neural3(Neural3),
    /// Attacks uniformly among the targets satisfying the most requirements.
    RequirementRule { requirements: Vec<Requirement> },
}

/// Family tag for the differentiable models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Classical,
    Neural3,
}

impl ScoreModel {
    pub fn classical(weights: Vec<f64>) -> Self {
        ScoreModel::Classical { weights }
    }

    pub fn requirement_rule(requirements: Vec<Requirement>) -> Self {
        ScoreModel::RequirementRule { requirements }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let model: ScoreModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScoreModel::Classical { weights } => {
                if weights.is_empty() {
                    return Err(FdpError::InvalidModel("classical model needs at least one weight".into()));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(FdpError::InvalidModel("classical weights must be finite".into()));
                }
            }
            ScoreModel::Neural3(net) => {
                Neural3::from_params(net.m, net.params.clone())?;
            }
            ScoreModel::RequirementRule { requirements } => {
                if requirements.iter().any(|r| !r.value.is_finite()) {
                    return Err(FdpError::InvalidModel("requirement values must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Number of features the model reads; `None` for rules, which only need
    /// their requirement indices to be in range.
    pub fn num_features(&self) -> Option<usize> {
        match self {
            ScoreModel::Classical { weights } => Some(weights.len()),
            ScoreModel::Neural3(net) => Some(net.m),
            ScoreModel::RequirementRule { .. } => None,
        }
    }

    pub fn family(&self) -> Option<ModelFamily> {
        match self {
            ScoreModel::Classical { .. } => Some(ModelFamily::Classical),
            ScoreModel::Neural3(_) => Some(ModelFamily::Neural3),
            ScoreModel::RequirementRule { .. } => None,
        }
    }

    pub fn check_features(&self, m: usize) -> Result<()> {
        match self {
            ScoreModel::RequirementRule { requirements } => {
                if let Some(r) = requirements.iter().find(|r| r.feature >= m) {
                    return Err(FdpError::InvalidModel(format!(
                        "requirement on feature {} but m = {m}",
                        r.feature
                    )));
                }
                Ok(())
            }
            _ => {
                let expected = self.num_features().unwrap_or(m);
                if expected != m {
                    return Err(FdpError::dims("score model features", m, expected));
                }
                Ok(())
            }
        }
    }

    /// Number of requirements a row satisfies (rules only).
    pub fn satisfied_count(requirements: &[Requirement], row: &[f64]) -> usize {
        requirements.iter().filter(|r| r.satisfied_by(row)).count()
    }

    /// `ln f(x)` for differentiable models, the satisfaction count for rules.
    pub fn log_score(&self, x: &[f64]) -> f64 {
        match self {
            ScoreModel::Classical { weights } => weights.iter().zip(x).map(|(w, v)| w * v).sum(),
            ScoreModel::Neural3(net) => net.forward(x).out,
            ScoreModel::RequirementRule { requirements } => Self::satisfied_count(requirements, x) as f64,
        }
    }

    /// Score of one feature vector. Classical and neural models return
    /// `exp(·)` of their output; rules return the satisfaction count.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_features(x.len())?;
        let g = self.log_score(x);
        let value = match self {
            ScoreModel::RequirementRule { .. } => g,
            _ => g.exp(),
        };
        let ok = match self {
            ScoreModel::RequirementRule { .. } => value.is_finite(),
            _ => value.is_finite() && value > 0.0,
        };
        if !ok {
            return Err(FdpError::BadScore { target: 0, value });
        }
        Ok(value)
    }

    /// Per-target log scores; fails on non-finite values.
    pub fn log_scores(&self, config: &FeatureConfig) -> Result<Vec<f64>> {
        self.check_features(config.m())?;
        (0..config.n())
            .map(|i| {
                let g = self.log_score(config.row(i));
                if g.is_finite() {
                    Ok(g)
                } else {
                    Err(FdpError::BadScore { target: i, value: g })
                }
            })
            .collect()
    }

    /// Probability that each target is attacked under `config`.
    pub fn attack_distribution(&self, config: &FeatureConfig) -> Result<Vec<f64>> {
        let g = self.log_scores(config)?;
        Ok(match self {
            ScoreModel::RequirementRule { .. } => argmax_uniform(&g),
            _ => softmax(&g),
        })
    }

    /// Flat parameter vector for the differentiable families.
    pub fn params(&self) -> Option<Vec<f64>> {
        match self {
            ScoreModel::Classical { weights } => Some(weights.clone()),
            ScoreModel::Neural3(net) => Some(net.params.clone()),
            ScoreModel::RequirementRule { .. } => None,
        }
    }

    /// Same family and shape with new parameters.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        match self {
            ScoreModel::Classical { weights } => {
                if params.len() != weights.len() {
                    return Err(FdpError::dims("classical weights", weights.len(), params.len()));
                }
                Ok(ScoreModel::Classical { weights: params })
            }
            ScoreModel::Neural3(net) => Ok(ScoreModel::Neural3(Neural3::from_params(net.m, params)?)),
            ScoreModel::RequirementRule { .. } => {
                Err(FdpError::InvalidModel("requirement rules have no parameters".into()))
            }
        }
    }

    /// Adds `scale · ∂ ln f(x)/∂θ` to `grad`; returns `ln f(x)`.
    pub fn accumulate_param_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        match self {
            ScoreModel::Classical { weights } => {
                for (g, v) in grad.iter_mut().zip(x) {
                    *g += scale * v;
                }
                Ok(weights.iter().zip(x).map(|(w, v)| w * v).sum())
            }
            ScoreModel::Neural3(net) => Ok(net.accumulate_param_grad(x, scale, grad)),
            ScoreModel::RequirementRule { .. } => {
                Err(FdpError::InvalidModel("requirement rules are not differentiable".into()))
            }
        }
    }

    /// `(ln f(x), ∂ ln f(x)/∂x)`.
    pub fn log_score_input_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            ScoreModel::Classical { weights } => {
                Ok((weights.iter().zip(x).map(|(w, v)| w * v).sum(), weights.clone()))
            }
            ScoreModel::Neural3(net) => Ok(net.input_grad(x)),
            ScoreModel::RequirementRule { .. } => {
                Err(FdpError::InvalidModel("requirement rules are not differentiable".into()))
            }
        }
    }
}

/// Numerically stable softmax of log scores.
pub fn softmax(g: &[f64]) -> Vec<f64> {
    let max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = g.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// `ln Σ exp(g_i)`.
pub fn log_sum_exp(g: &[f64]) -> f64 {
    let max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + g.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn argmax_uniform(counts: &[f64]) -> Vec<f64> {
    let best = counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let winners = counts.iter().filter(|&&c| c == best).count() as f64;
    counts
        .iter()
        .map(|&c| if c == best { 1.0 / winners } else { 0.0 })
        .collect()
}

/// Draws `count` attacked targets i.i.d. from the attack distribution.
pub fn sample_attacks(model: &ScoreModel, config: &FeatureConfig, count: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    sample_attacks_with(model, config, count, &mut rng)
}

pub fn sample_attacks_with(
    model: &ScoreModel,
    config: &FeatureConfig,
    count: usize,
    rng: &mut FdpRng,
) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(FdpError::OutOfRange {
            name: "count",
            value: 0.0,
            expected: "at least 1",
        });
    }
    let p = model.attack_distribution(config)?;
    let dist = WeightedIndex::new(&p).map_err(|e| FdpError::InvalidModel(e.to_string()))?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

/// Total log-likelihood `Σ_obs [ln f(x_y) − ln Σ_i f(x_i)]`.
pub fn log_likelihood(model: &ScoreModel, dataset: &AttackDataset) -> Result<f64> {
    if model.family().is_none() {
        return Err(FdpError::InvalidModel("log-likelihood needs a classical or neural model".into()));
    }
    if dataset.num_observations() == 0 {
        return Err(FdpError::EmptyDataset);
    }
    let mut total = 0.0;
    for group in dataset.groups() {
        if group.targets.is_empty() {
            continue;
        }
        let g = model.log_scores(&group.config)?;
        let lse = log_sum_exp(&g);
        for &y in &group.targets {
            total += g[y] - lse;
        }
    }
    Ok(total)
}

/// Log-likelihood and its gradient with respect to the model parameters,
/// restricted to the observations selected by `batch` (`(group, observation)`
/// indices), or all observations when `batch` is `None`.
pub fn log_likelihood_grad(
    model: &ScoreModel,
    dataset: &AttackDataset,
    batch: Option<&[(usize, usize)]>,
) -> Result<(f64, Vec<f64>)> {
    let params = model
        .params()
        .ok_or_else(|| FdpError::InvalidModel("log-likelihood needs a classical or neural model".into()))?;
    if dataset.num_observations() == 0 {
        return Err(FdpError::EmptyDataset);
    }
    let mut grad = vec![0.0; params.len()];
    let mut total = 0.0;
    let n = dataset.n();
    let mut scratch = vec![0.0; n];
    let mut counts = vec![0.0; n];
    let mut add_group = |gi: usize, ys: &mut dyn Iterator<Item = usize>| -> Result<()> {
        let ys: Vec<usize> = ys.collect();
        if ys.is_empty() {
            return Ok(());
        }
        let config = &dataset.groups()[gi].config;
        // network activations are kept for the backward pass
        let acts: Vec<Activations> = match model {
            ScoreModel::Neural3(net) => (0..n).map(|i| net.forward(config.row(i))).collect(),
            _ => Vec::new(),
        };
        for (i, s) in scratch.iter_mut().enumerate() {
            *s = match acts.get(i) {
                Some(a) => a.out,
                None => model.log_score(config.row(i)),
            };
            if !s.is_finite() {
                return Err(FdpError::BadScore { target: i, value: *s });
            }
        }
        let lse = log_sum_exp(&scratch);
        let weight = ys.len() as f64;
        counts.iter_mut().for_each(|c| *c = 0.0);
        for &y in &ys {
            total += scratch[y] - lse;
            counts[y] += 1.0;
        }
        for i in 0..n {
            let scale = counts[i] - weight * (scratch[i] - lse).exp();
            match (model, acts.get(i)) {
                (ScoreModel::Neural3(net), Some(a)) => net.backprop(config.row(i), a, scale, &mut grad),
                _ => {
                    model.accumulate_param_grad(config.row(i), scale, &mut grad)?;
                }
            }
        }
        Ok(())
    };
    match batch {
        None => {
            for (gi, group) in dataset.groups().iter().enumerate() {
                add_group(gi, &mut group.targets.iter().copied())?;
            }
        }
        Some(items) => {
            // consecutive items from the same group share one forward pass
            let mut start = 0;
            while start < items.len() {
                let gi = items[start].0;
                let mut end = start;
                while end < items.len() && items[end].0 == gi {
                    end += 1;
                }
                let targets = &dataset.groups()[gi].targets;
                add_group(gi, &mut items[start..end].iter().map(|&(_, o)| targets[o]))?;
                start = end;
            }
        }
    }
    Ok((total, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn zero_weights_score_one() {
        let model = ScoreModel::classical(vec![0.0, 0.0, 0.0]);
        assert_eq!(model.score(&[0.3, 1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn classical_score_direct() {
        let model = ScoreModel::classical(vec![1.0, -1.0]);
        let s = model.score(&[1.0, 0.0]).unwrap();
        assert!((s - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn halving_by_log_two_shift() {
        let model = ScoreModel::classical(vec![2.0, 0.5]);
        let a = model.score(&[0.8, 0.4]).unwrap();
        // decrease w·x by ln 2 through the first feature
        let b = model.score(&[0.8 - std::f64::consts::LN_2 / 2.0, 0.4]).unwrap();
        assert!((b - a / 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_target_distribution() {
        let model = ScoreModel::classical(vec![1.0]);
        let config = FeatureConfig::new(2, 1, vec![1.0, 0.0]).unwrap();
        let p = model.attack_distribution(&config).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert!((p[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn rule_is_uniform_over_argmax() {
        let model = ScoreModel::requirement_rule(vec![Requirement::new(0, 1.0), Requirement::new(1, 0.0)]);
        let config = FeatureConfig::new(3, 2, vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(model.attack_distribution(&config).unwrap(), vec![1.0, 0.0, 0.0]);
        let tie = FeatureConfig::new(3, 2, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        let p = model.attack_distribution(&tie).unwrap();
        assert_eq!(p, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn large_weights_do_not_overflow() {
        let model = ScoreModel::classical(vec![900.0]);
        let config = FeatureConfig::new(2, 1, vec![1.0, 0.0]).unwrap();
        let p = model.attack_distribution(&config).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(model.score(&[1.0]).is_err(), "raw score overflows");
    }

    #[test]
    fn single_sample_in_support() {
        let model = ScoreModel::classical(vec![0.3]);
        let config = FeatureConfig::new(3, 1, vec![0.1, 0.5, 0.9]).unwrap();
        let draws = sample_attacks(&model, &config, 1, 11).unwrap();
        assert_eq!(draws.len(), 1);
        assert!(draws[0] < 3);
        assert!(sample_attacks(&model, &config, 0, 11).is_err());
    }

    #[test]
    fn neural_json_round_trip() {
        let mut rng = rng_from_seed(3);
        let model = ScoreModel::Neural3(Neural3::random(4, &mut rng));
        let s = model.to_json_string().unwrap();
        assert!(s.contains("\"variant\": \"neural3\""));
        assert_eq!(ScoreModel::from_json_str(&s).unwrap(), model);
    }

    #[test]
    fn model_json_rejects_garbage() {
        assert!(ScoreModel::from_json_str(r#"{"variant":"classical","weights":[]}"#).is_err());
        assert!(ScoreModel::from_json_str(r#"{"variant":"nope"}"#).is_err());
        assert!(ScoreModel::from_json_str(
            r#"{"variant":"neural3","layer1":{"weights":[[1.0]],"bias":[0.0]},"layer2":{"weights":[],"bias":[]},"layer3":{"weights":[],"bias":[]}}"#
        )
        .is_err());
    }
}
