//! Random instances, ground-truth models, configurations and simulated
//! attack logs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacker::{sample_attacks, ModelFamily, Neural3, ScoreModel};
use crate::dataset::{AttackDataset, AttackGroup};
use crate::error::{FdpError, Result};
use crate::instance::{BinaryDomain, EntryDomain, FdpInstance, FeatureConfig, FeatureKind, InstanceDoc, INSTANCE_SCHEMA_VERSION};
use crate::rng::{derive_seed, rng_from_seed, FdpRng};

/// Largest magnitude of a generated classical weight.
pub const TRUTH_WEIGHT_RANGE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceFamily {
    /// Two thirds binary features (first), one third continuous; classical
    /// attacker. Binary costs are drawn from `U(-3, 3)`, continuous ones from
    /// `U(0, 3)`, radii from `U(0, 0.25)`.
    MixedClassical,
    /// All-continuous features with full-width boxes, costs `U(0, 1)` and
    /// budget `U(0, 0.2 n m)`; neural attacker.
    ContinuousNeural,
    /// The classical family with every feature binary.
    AllBinary,
}

impl InstanceFamily {
    pub fn model_family(self) -> ModelFamily {
        match self {
            InstanceFamily::ContinuousNeural => ModelFamily::Neural3,
            _ => ModelFamily::Classical,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceGenSpec {
    pub n: usize,
    pub m: usize,
    pub family: InstanceFamily,
    pub seed: u64,
}

fn uniform(rng: &mut FdpRng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws an instance. Entries are drawn target by target, feature by
/// feature, then the losses, then the budget.
pub fn generate_instance(spec: &InstanceGenSpec) -> Result<FdpInstance> {
    let (n, m) = (spec.n, spec.m);
    if n == 0 || m == 0 {
        return Err(FdpError::InvalidInstance("n and m must be positive".into()));
    }
    if spec.family == InstanceFamily::MixedClassical && m % 3 != 0 {
        return Err(FdpError::Precondition(format!(
            "the classical family splits features 2:1 and needs m divisible by 3, got {m}"
        )));
    }
    let kinds: Vec<FeatureKind> = match spec.family {
        InstanceFamily::MixedClassical => (0..m)
            .map(|k| if k < 2 * m / 3 { FeatureKind::Binary } else { FeatureKind::Continuous })
            .collect(),
        InstanceFamily::ContinuousNeural => vec![FeatureKind::Continuous; m],
        InstanceFamily::AllBinary => vec![FeatureKind::Binary; m],
    };
    let mut rng = rng_from_seed(spec.seed);
    let mut actual = vec![vec![0.0; m]; n];
    let mut costs = vec![vec![0.0; m]; n];
    let mut radii = vec![vec![EntryDomain::Binary(BinaryDomain::Free); m]; n];
    let mut max_cost = 0.0;
    for i in 0..n {
        for k in 0..m {
            match (spec.family, kinds[k]) {
                (InstanceFamily::ContinuousNeural, _) => {
                    actual[i][k] = uniform(&mut rng, 0.0, 1.0);
                    costs[i][k] = uniform(&mut rng, 0.0, 1.0);
                    radii[i][k] = EntryDomain::Radius(1.0);
                }
                (_, FeatureKind::Binary) => {
                    actual[i][k] = if rng.gen::<bool>() { 1.0 } else { 0.0 };
                    costs[i][k] = uniform(&mut rng, -3.0, 3.0);
                    max_cost += costs[i][k];
                }
                (_, FeatureKind::Continuous) => {
                    let x = uniform(&mut rng, 0.0, 1.0);
                    let eta = uniform(&mut rng, 0.0, 3.0);
                    let tau = uniform(&mut rng, 0.0, 0.25);
                    actual[i][k] = x;
                    costs[i][k] = eta;
                    radii[i][k] = EntryDomain::Radius(tau);
                    max_cost += eta * x.min(1.0 - x).min(tau);
                }
            }
        }
    }
    let losses: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.0, 1.0)).collect();
    let budget_cap = match spec.family {
        InstanceFamily::ContinuousNeural => 0.2 * (n * m) as f64,
        // negative binary costs can make the sum negative
        _ => 0.2 * f64::max(max_cost, 0.0),
    };
    let budget = uniform(&mut rng, 0.0, budget_cap);
    FdpInstance::try_from(InstanceDoc {
        version: INSTANCE_SCHEMA_VERSION,
        n,
        m,
        kinds,
        actual,
        losses,
        radii,
        costs,
        budget,
        constraints: Vec::new(),
    })
}

/// Ground-truth attacker for a family: classical weights uniform in
/// `[-0.5, 0.5]`, or a network with parameters uniform in `[-0.5, 0.5]`.
pub fn generate_truth_model(family: ModelFamily, m: usize, seed: u64) -> ScoreModel {
    let mut rng = rng_from_seed(seed);
    match family {
        ModelFamily::Classical => {
            ScoreModel::classical((0..m).map(|_| rng.gen_range(-TRUTH_WEIGHT_RANGE..TRUTH_WEIGHT_RANGE)).collect())
        }
        ModelFamily::Neural3 => ScoreModel::Neural3(Neural3::random(m, &mut rng)),
    }
}

/// `count` configurations with every entry uniform in `[0, 1]`.
pub fn random_configs(n: usize, m: usize, count: usize, seed: u64) -> Vec<FeatureConfig> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let values = (0..n * m).map(|_| rng.gen_range(0.0..1.0)).collect();
            FeatureConfig::new(n, m, values).expect("dimensions match")
        })
        .collect()
}

/// Attack log with `per_config` draws under each configuration. Group `g`
/// uses its own derived seed, so adding groups never changes earlier ones.
pub fn simulate_dataset(model: &ScoreModel, configs: &[FeatureConfig], per_config: usize, seed: u64) -> Result<AttackDataset> {
    let first = configs
        .first()
        .ok_or_else(|| FdpError::Precondition("simulation needs at least one configuration".into()))?;
    let (n, m) = (first.n(), first.m());
    let groups = configs
        .iter()
        .enumerate()
        .map(|(g, c)| {
            c.check_dims(n, m)?;
            Ok(AttackGroup {
                config: c.clone(),
                targets: sample_attacks(model, c, per_config, derive_seed(seed, g as u64))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AttackDataset::untyped(n, m, groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_split() {
        let inst = generate_instance(&InstanceGenSpec {
            n: 4,
            m: 12,
            family: InstanceFamily::MixedClassical,
            seed: 3,
        })
        .unwrap();
        assert_eq!(inst.binary_features().count(), 8);
        assert_eq!(inst.continuous_features().count(), 4);
    }

    #[test]
    fn classical_needs_multiple_of_three() {
        let spec = InstanceGenSpec {
            n: 4,
            m: 4,
            family: InstanceFamily::MixedClassical,
            seed: 3,
        };
        assert!(matches!(generate_instance(&spec), Err(FdpError::Precondition(_))));
    }
}
