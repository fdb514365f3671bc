//! Attack logs grouped by the observed configuration that was shown.
//!
//! On disk a dataset is a pair of CSV files:
//!
//! - configs: `config_id,target_id,feature_id,value`, one row per entry of
//!   every configuration (dense: every triple appears exactly once);
//! - observations: `config_id,attacked_target`, one row per attack.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FdpError, Result};
use crate::instance::{FeatureConfig, FeatureKind};

/// Upper bound on `groups · n · m` accepted from untrusted CSV input.
pub const MAX_DATASET_ENTRIES: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq)]
pub struct AttackGroup {
    pub config: FeatureConfig,
    /// Attacked target of each observation under `config`.
    pub targets: Vec<usize>,
}

impl AttackGroup {
    pub fn counts(&self, n: usize) -> Vec<usize> {
        let mut c = vec![0; n];
        for &t in &self.targets {
            c[t] += 1;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackDataset {
    n: usize,
    m: usize,
    kinds: Vec<FeatureKind>,
    groups: Vec<AttackGroup>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfigRow {
    config_id: usize,
    target_id: usize,
    feature_id: usize,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRow {
    config_id: usize,
    attacked_target: usize,
}

impl AttackDataset {
    pub fn new(n: usize, m: usize, kinds: Vec<FeatureKind>, groups: Vec<AttackGroup>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(FdpError::InvalidDataset("n and m must be positive".into()));
        }
        if kinds.len() != m {
            return Err(FdpError::dims("dataset kinds", m, kinds.len()));
        }
        for (g, group) in groups.iter().enumerate() {
            group.config.check_dims(n, m)?;
            if let Some(&t) = group.targets.iter().find(|&&t| t >= n) {
                return Err(FdpError::InvalidDataset(format!(
                    "group {g} records target {t} but n = {n}"
                )));
            }
            if group.config.values().iter().any(|v| !v.is_finite()) {
                return Err(FdpError::InvalidDataset(format!("group {g} has non-finite feature values")));
            }
        }
        Ok(Self { n, m, kinds, groups })
    }

    /// Dataset whose feature kinds are all continuous.
    pub fn untyped(n: usize, m: usize, groups: Vec<AttackGroup>) -> Result<Self> {
        Self::new(n, m, vec![FeatureKind::Continuous; m], groups)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn groups(&self) -> &[AttackGroup] {
        &self.groups
    }

    pub fn num_observations(&self) -> usize {
        self.groups.iter().map(|g| g.targets.len()).sum()
    }

    pub(crate) fn with_groups(&self, groups: Vec<AttackGroup>) -> Self {
        Self {
            n: self.n,
            m: self.m,
            kinds: self.kinds.clone(),
            groups,
        }
    }

    pub fn write_csv<W1: Write, W2: Write>(&self, configs: W1, observations: W2) -> Result<()> {
        let mut cw = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(configs);
        for (g, group) in self.groups.iter().enumerate() {
            for i in 0..self.n {
                for k in 0..self.m {
                    cw.serialize(ConfigRow {
                        config_id: g,
                        target_id: i,
                        feature_id: k,
                        value: group.config.get(i, k),
                    })?;
                }
            }
        }
        cw.flush()?;
        let mut ow = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(observations);
        for (g, group) in self.groups.iter().enumerate() {
            for &t in &group.targets {
                ow.serialize(ObservationRow {
                    config_id: g,
                    attacked_target: t,
                })?;
            }
        }
        ow.flush()?;
        Ok(())
    }

    /// Parses the CSV pair. Dimensions are inferred from the largest ids;
    /// every `(config, target, feature)` triple must appear exactly once.
    /// Kinds default to continuous when not supplied.
    pub fn read_csv<R1: Read, R2: Read>(
        configs: R1,
        observations: R2,
        kinds: Option<Vec<FeatureKind>>,
    ) -> Result<Self> {
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(configs).deserialize::<ConfigRow>() {
            rows.push(rec?);
        }
        if rows.is_empty() {
            return Err(FdpError::InvalidDataset("configs file has no rows".into()));
        }
        let dim = |f: fn(&ConfigRow) -> usize| rows.iter().map(f).max().unwrap_or(0).checked_add(1);
        let (groups, n, m) = match (dim(|r| r.config_id), dim(|r| r.target_id), dim(|r| r.feature_id)) {
            (Some(g), Some(n), Some(m)) => (g, n, m),
            _ => return Err(FdpError::InvalidDataset("id overflow".into())),
        };
        let total = groups.checked_mul(n).and_then(|v| v.checked_mul(m));
        match total {
            Some(t) if t == rows.len() && t <= MAX_DATASET_ENTRIES => {}
            _ => {
                return Err(FdpError::InvalidDataset(format!(
                    "configs file must list every (config, target, feature) triple exactly once; \
                     ids imply {groups}x{n}x{m} entries but {} rows were given",
                    rows.len()
                )))
            }
        }
        let mut values = vec![f64::NAN; total.unwrap_or(0)];
        for r in &rows {
            let slot = &mut values[(r.config_id * n + r.target_id) * m + r.feature_id];
            if !slot.is_nan() {
                return Err(FdpError::InvalidDataset(format!(
                    "duplicate entry config {} target {} feature {}",
                    r.config_id, r.target_id, r.feature_id
                )));
            }
            if !r.value.is_finite() {
                return Err(FdpError::InvalidDataset("non-finite feature value".into()));
            }
            *slot = r.value;
        }
        let mut out_groups: Vec<AttackGroup> = values
            .chunks(n * m)
            .map(|chunk| AttackGroup {
                config: FeatureConfig::new(n, m, chunk.to_vec()).expect("chunk has n*m entries"),
                targets: Vec::new(),
            })
            .collect();
        for rec in csv::Reader::from_reader(observations).deserialize::<ObservationRow>() {
            let rec = rec?;
            if rec.config_id >= groups {
                return Err(FdpError::InvalidDataset(format!(
                    "observation references unknown config {}",
                    rec.config_id
                )));
            }
            out_groups[rec.config_id].targets.push(rec.attacked_target);
        }
        let kinds = kinds.unwrap_or_else(|| vec![FeatureKind::Continuous; m]);
        Self::new(n, m, kinds, out_groups)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AttackDataset {
        let g0 = AttackGroup {
            config: FeatureConfig::new(2, 2, vec![1.0, 0.0, 0.25, 0.5]).unwrap(),
            targets: vec![0, 1, 1],
        };
        let g1 = AttackGroup {
            config: FeatureConfig::new(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
            targets: vec![1],
        };
        AttackDataset::untyped(2, 2, vec![g0, g1]).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let ds = small();
        let (mut c, mut o) = (Vec::new(), Vec::new());
        ds.write_csv(&mut c, &mut o).unwrap();
        let text = String::from_utf8(c.clone()).unwrap();
        assert!(text.starts_with("config_id,target_id,feature_id,value\n"));
        assert!(!text.contains('\r'));
        let back = AttackDataset::read_csv(&c[..], &o[..], None).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.num_observations(), 4);
    }

    #[test]
    fn rejects_out_of_range_targets() {
        let g = AttackGroup {
            config: FeatureConfig::zeros(2, 1),
            targets: vec![2],
        };
        assert!(AttackDataset::untyped(2, 1, vec![g]).is_err());
    }

    #[test]
    fn rejects_sparse_or_duplicate_configs() {
        let c = "config_id,target_id,feature_id,value\n0,0,0,1\n0,1,0,0\n0,1,0,0\n";
        let o = "config_id,attacked_target\n0,1\n";
        assert!(AttackDataset::read_csv(c.as_bytes(), o.as_bytes(), None).is_err());
        let huge = "config_id,target_id,feature_id,value\n0,0,18446744073709551614,1\n";
        assert!(AttackDataset::read_csv(huge.as_bytes(), o.as_bytes(), None).is_err());
        let bad_obs = "config_id,attacked_target\n0,7\n";
        let c = "config_id,target_id,feature_id,value\n0,0,0,1\n0,1,0,0\n";
        assert!(AttackDataset::read_csv(c.as_bytes(), bad_obs.as_bytes(), None).is_err());
    }
}
