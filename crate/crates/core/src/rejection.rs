//! Rejection step: keep the fraction of simulations closest to the observed
//! statistics.

use std::cmp::Ordering;

use log::warn;

use crate::error::{Error, Result};
use crate::scaling::ScalingVector;
use crate::table::{ObservedStats, ReferenceTable};

/// Accepted rows, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceSet {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub acceptance_rate: f64,
}

impl AcceptanceSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn mean_distance(&self) -> f64 {
        self.distances.iter().sum::<f64>() / self.distances.len() as f64
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.last().copied().unwrap_or(0.0)
    }
}

/// Number of accepted rows for `rate` out of `n`: `floor(rate * n)`, at
/// least one. A relative slack of 1e-9 keeps products such as `0.29 * 100`
/// from flooring one row short.
pub fn accepted_count(rate: f64, n: usize) -> usize {
    let raw = (rate * n as f64 * (1.0 + 1e-9)).floor() as usize;
    raw.min(n)
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "acceptance rate must lie in (0, 1], got {rate}"
        )));
    }
    Ok(())
}

#[inline]
fn by_distance_then_row(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Accepts the `max(1, floor(rate * n))` rows nearest to `observed`, where
/// `n` counts the rows left after the optional exclusion. Ties at the
/// boundary go to the lower row index.
pub fn reject(
    table: &ReferenceTable,
    observed: &ObservedStats,
    scaling: &ScalingVector,
    rate: f64,
    exclude: Option<usize>,
) -> Result<AcceptanceSet> {
    observed.ensure_matches(table)?;
    reject_values(table, observed.values(), scaling, rate, exclude)
}

pub(crate) fn reject_values(
    table: &ReferenceTable,
    observed: &[f64],
    scaling: &ScalingVector,
    rate: f64,
    exclude: Option<usize>,
) -> Result<AcceptanceSet> {
    check_rate(rate)?;
    let n = table.n_rows();
    if observed.len() != table.n_stats() || scaling.len() != table.n_stats() {
        return Err(Error::LengthMismatch {
            expected: table.n_stats(),
            actual: if observed.len() != table.n_stats() {
                observed.len()
            } else {
                scaling.len()
            },
        });
    }
    if let Some(e) = exclude {
        if e >= n {
            return Err(Error::InvalidArgument(format!(
                "excluded row {e} out of range for {n} rows"
            )));
        }
    }
    let effective = n - usize::from(exclude.is_some());
    if effective == 0 {
        return Err(Error::EmptyEffectiveTable);
    }
    let mut keep = accepted_count(rate, effective);
    if keep == 0 {
        warn!("acceptance rate {rate} keeps no row out of {effective}; accepting the nearest one");
        keep = 1;
    }

    let mut scored: Vec<(f64, usize)> = (0..n)
        .filter(|&i| Some(i) != exclude)
        .map(|i| (scaling.dist(table.stat_row(i), observed), i))
        .collect();
    if keep < scored.len() {
        scored.select_nth_unstable_by(keep - 1, by_distance_then_row);
        scored.truncate(keep);
    }
    scored.sort_unstable_by(by_distance_then_row);

    let (distances, indices) = scored.into_iter().unzip();
    Ok(AcceptanceSet {
        indices,
        distances,
        acceptance_rate: rate,
    })
}
