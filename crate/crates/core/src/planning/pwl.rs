//! Piecewise-linear overestimate of `e^z` on `[-2W, 0]`.

use serde::{Deserialize, Serialize};

use crate::error::{FdpError, Result};

/// Segments are numbered from the top: segment `l` spans depths
/// `[l ε, (l+1) ε]` below zero, the last one truncated at `2W`. A point at
/// depth `D` is represented by fill amounts `z_l ∈ [0, len_l]` with
/// `Σ z_l = D`, filled in order, and the approximant is
/// `e^{-2W} + Σ slope_l (len_l − z_l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseExpApprox {
    pub w_l1: f64,
    pub epsilon: f64,
    pub lengths: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl PiecewiseExpApprox {
    pub fn new(w_l1: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(FdpError::OutOfRange {
                name: "epsilon",
                value: epsilon,
                expected: "in (0, 1)",
            });
        }
        if !(w_l1.is_finite() && w_l1 >= 0.0) {
            return Err(FdpError::OutOfRange {
                name: "weight L1 norm",
                value: w_l1,
                expected: "finite and nonnegative",
            });
        }
        let span = 2.0 * w_l1;
        let count = (span / epsilon).ceil() as usize;
        let mut lengths = Vec::with_capacity(count);
        let mut slopes = Vec::with_capacity(count);
        for l in 0..count {
            let top = l as f64 * epsilon;
            let bottom = ((l + 1) as f64 * epsilon).min(span);
            let len = bottom - top;
            if len <= 0.0 {
                break;
            }
            lengths.push(len);
            slopes.push(((-top).exp() - (-bottom).exp()) / len);
        }
        Ok(Self {
            w_l1,
            epsilon,
            lengths,
            slopes,
        })
    }

    pub fn segments(&self) -> usize {
        self.lengths.len()
    }

    /// Depth at which segment `l` starts.
    pub fn segment_start(&self, l: usize) -> f64 {
        self.lengths[..l].iter().sum()
    }

    pub fn floor_value(&self) -> f64 {
        (-2.0 * self.w_l1).exp()
    }

    /// In-order fill amounts representing depth `d` (clamped to `[0, 2W]`).
    pub fn fill(&self, depth: f64) -> Vec<f64> {
        let mut rest = depth.max(0.0);
        self.lengths
            .iter()
            .map(|&len| {
                let z = rest.min(len);
                rest -= z;
                z
            })
            .collect()
    }

    /// Approximant value for fill amounts `z`.
    pub fn value_from_fill(&self, z: &[f64]) -> f64 {
        self.floor_value()
            + self
                .slopes
                .iter()
                .zip(&self.lengths)
                .zip(z)
                .map(|((g, len), z)| g * (len - z))
                .sum::<f64>()
    }

    /// Approximant of `e^z` for `z ∈ [-2W, 0]`.
    pub fn eval(&self, z: f64) -> f64 {
        self.value_from_fill(&self.fill(-z))
    }
}
