//! Local-linear regression adjustment of accepted parameters.
//!
//! Accepted parameters are regressed on their standardized statistic offsets
//! `(s_i - s) / scale` by weighted least squares with Epanechnikov weights
//! `1 - (d_i / d_max)^2`, and each draw is corrected to
//! `theta_i - beta . (s_i - s) / scale`.

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rejection::AcceptanceSet;
use crate::scaling::ScalingVector;
use crate::table::{ObservedStats, ReferenceTable};

/// Relative pivot threshold below which the normal equations are treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    params: Vec<f64>,
    n_params: usize,
    pub weights: Vec<f64>,
    pub source: AcceptanceSet,
    /// Whether the regression correction was applied.
    pub adjusted: bool,
}

impl PosteriorSample {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.params[i * self.n_params..(i + 1) * self.n_params]
    }

    /// Zeroes the weight of every row failing `keep` and renormalizes.
    /// `None` when no weight remains.
    pub fn restrict(&self, keep: impl Fn(&[f64]) -> bool) -> Option<Self> {
        let weights: Vec<f64> = (0..self.len())
            .map(|i| if keep(self.row(i)) { self.weights[i] } else { 0.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(Self {
            weights: weights.iter().map(|w| w / total).collect(),
            ..self.clone()
        })
    }

    /// Builds a sample directly from rows and weights; weights are
    /// normalized here.
    pub fn from_rows(rows: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if rows.is_empty() || rows.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                actual: weights.len(),
            });
        }
        let n_params = rows[0].len();
        if rows.iter().any(|r| r.len() != n_params) {
            return Err(Error::InvalidArgument("ragged parameter rows".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        let n = rows.len();
        Ok(Self {
            params: rows.into_iter().flatten().collect(),
            n_params,
            weights: weights.iter().map(|w| w / total).collect(),
            source: AcceptanceSet {
                indices: (0..n).collect(),
                distances: vec![0.0; n],
                acceptance_rate: 1.0,
            },
            adjusted: false,
        })
    }
}

/// Epanechnikov weights on the accepted distances, normalized to sum 1.
/// Falls back to uniform weights when every accepted row sits at `d_max`
/// (including `d_max = 0`).
fn kernel_weights(distances: &[f64]) -> Vec<f64> {
    let n = distances.len();
    let d_max = distances.iter().copied().fold(0.0, f64::max);
    let raw: Vec<f64> = if d_max > 0.0 {
        distances.iter().map(|d| 1.0 - (d / d_max).powi(2)).collect()
    } else {
        vec![0.0; n]
    };
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / n as f64; n]
    }
}

/// Solves `a x = b` for a square system with several right-hand sides by
/// Gaussian elimination with partial pivoting. Returns `None` when a pivot
/// falls below `RANK_TOL` times the largest diagonal entry of `a`.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let q = a.len();
    let scale = (0..q).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..q {
        let pivot = (col..q).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= RANK_TOL * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..q {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..q {
                a[row][c] -= f * a[col][c];
            }
            for c in 0..b[row].len() {
                b[row][c] -= f * b[col][c];
            }
        }
    }
    let rhs = b[0].len();
    let mut x = vec![vec![0.0; rhs]; q];
    for row in (0..q).rev() {
        for c in 0..rhs {
            let tail: f64 = (row + 1..q).map(|j| a[row][j] * x[j][c]).sum();
            x[row][c] = (b[row][c] - tail) / a[row][row];
        }
    }
    Some(x)
}

/// Regression-adjusts the accepted parameters toward the observed statistics.
pub fn adjust_linear(
    table: &ReferenceTable,
    accepted: &AcceptanceSet,
    observed: &ObservedStats,
    scaling: &ScalingVector,
) -> Result<PosteriorSample> {
    observed.ensure_matches(table)?;
    adjust_values(table, accepted, observed.values(), scaling)
}

pub(crate) fn adjust_values(
    table: &ReferenceTable,
    accepted: &AcceptanceSet,
    observed: &[f64],
    scaling: &ScalingVector,
) -> Result<PosteriorSample> {
    let p = table.n_params();
    let n_acc = accepted.len();
    let active: Vec<usize> = scaling.active().collect();
    let needed = p + table.n_stats() + 2;
    if n_acc < needed {
        return Err(Error::TooFewAccepted {
            needed,
            actual: n_acc,
        });
    }

    let weights = kernel_weights(&accepted.distances);
    let mut params: Vec<f64> = accepted
        .indices
        .iter()
        .flat_map(|&i| table.param_row(i).iter().copied())
        .collect();
    let unadjusted = |params, weights| PosteriorSample {
        params,
        n_params: p,
        weights,
        source: accepted.clone(),
        adjusted: false,
    };

    if accepted.max_distance() == 0.0 || p == 0 {
        return Ok(unadjusted(params, weights));
    }

    // Design rows: [1, z_1, .., z_k] with z the standardized offsets.
    let design: Vec<Vec<f64>> = accepted
        .indices
        .iter()
        .map(|&i| {
            let s = table.stat_row(i);
            std::iter::once(1.0)
                .chain(active.iter().map(|&j| (s[j] - observed[j]) / scaling.scales()[j]))
                .collect()
        })
        .collect();
    let q = active.len() + 1;
    let mut xtwx = vec![vec![0.0; q]; q];
    let mut xtwy = vec![vec![0.0; p]; q];
    for (r, (x, &w)) in design.iter().zip(&weights).enumerate() {
        if w == 0.0 {
            continue;
        }
        let theta = &params[r * p..(r + 1) * p];
        for a in 0..q {
            let wa = w * x[a];
            for b in 0..q {
                xtwx[a][b] += wa * x[b];
            }
            for (c, t) in theta.iter().enumerate() {
                xtwy[a][c] += wa * t;
            }
        }
    }

    let Some(coef) = solve(xtwx, xtwy) else {
        warn!("regression adjustment is rank deficient; using unadjusted parameters");
        return Ok(unadjusted(params, weights));
    };

    for (r, x) in design.iter().enumerate() {
        for c in 0..p {
            let correction: f64 = (1..q).map(|a| coef[a][c] * x[a]).sum();
            params[r * p + c] -= correction;
        }
    }
    Ok(PosteriorSample {
        params,
        n_params: p,
        weights,
        source: accepted.clone(),
        adjusted: true,
    })
}

/// Draws `count` parameter vectors with replacement, proportionally to the
/// sample weights.
pub fn sample_posterior<R: Rng + ?Sized>(
    sample: &PosteriorSample,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("posterior draw count must be at least 1".into()));
    }
    let dist = WeightedIndex::new(&sample.weights)
        .map_err(|e| Error::InvalidArgument(format!("posterior weights: {e}")))?;
    Ok((0..count)
        .map(|_| sample.row(dist.sample(rng)).to_vec())
        .collect())
}
