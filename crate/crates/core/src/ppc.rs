//! Per-statistic posterior predictive checks.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::Replicates;
use crate::table::ObservedStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatCheck {
    pub stat: String,
    pub observed: f64,
    pub replicates: Vec<f64>,
    /// Fraction of replicates `<=` the observed value.
    pub lower_tail: f64,
    /// Fraction of replicates `>=` the observed value.
    pub upper_tail: f64,
    /// `2 * min(lower, upper)`, capped at 1.
    pub two_sided_p: f64,
    pub outside_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcReport {
    pub n_replicates: usize,
    pub per_stat: Vec<StatCheck>,
}

impl PpcReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("PpcReport is always serializable")
    }

    /// Statistics whose observed value falls outside the replicate range.
    pub fn flagged(&self) -> impl Iterator<Item = &StatCheck> {
        self.per_stat.iter().filter(|c| c.outside_range)
    }
}

fn check_shape(replicates: &Replicates, observed: &ObservedStats) -> Result<()> {
    if replicates.is_empty() {
        return Err(Error::InvalidArgument("posterior predictive check needs at least one replicate".into()));
    }
    let k = observed.values().len();
    if let Some(r) = replicates.iter().find(|r| r.len() != k) {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: r.len(),
        });
    }
    Ok(())
}

fn column(replicates: &Replicates, j: usize) -> Vec<f64> {
    replicates.iter().map(|r| r[j]).collect()
}

pub fn ppc_report(replicates: &Replicates, observed: &ObservedStats) -> Result<PpcReport> {
    check_shape(replicates, observed)?;
    let n = replicates.len() as f64;
    let per_stat = observed
        .stat_names()
        .iter()
        .zip(observed.values())
        .enumerate()
        .map(|(j, (name, &obs))| {
            let values = column(replicates, j);
            let lower = values.iter().filter(|&&v| v <= obs).count() as f64 / n;
            let upper = values.iter().filter(|&&v| v >= obs).count() as f64 / n;
            let (min, max) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            StatCheck {
                stat: name.clone(),
                observed: obs,
                replicates: values,
                lower_tail: lower,
                upper_tail: upper,
                two_sided_p: (2.0 * lower.min(upper)).min(1.0),
                outside_range: obs < min || obs > max,
            }
        })
        .collect();
    Ok(PpcReport {
        n_replicates: replicates.len(),
        per_stat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub stat: String,
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub observed: f64,
}

/// Equal-width bins spanning the replicates and the observed value. When
/// that span is a single point, every replicate lands in the first bin.
pub fn ppc_histogram_data(
    replicates: &Replicates,
    observed: &ObservedStats,
    bins: usize,
) -> Result<Vec<Histogram>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    check_shape(replicates, observed)?;
    Ok(observed
        .stat_names()
        .iter()
        .zip(observed.values())
        .enumerate()
        .map(|(j, (name, &obs))| {
            let values = column(replicates, j);
            let (lo, hi) = values
                .iter()
                .fold((obs, obs), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let width = (hi - lo) / bins as f64;
            let edges = (0..=bins)
                .map(|b| if b == bins { hi } else { lo + width * b as f64 })
                .collect();
            let mut counts = vec![0; bins];
            for v in values {
                let b = if width > 0.0 {
                    (((v - lo) / width) as usize).min(bins - 1)
                } else {
                    0
                };
                counts[b] += 1;
            }
            Histogram {
                stat: name.clone(),
                edges,
                counts,
                observed: obs,
            }
        })
        .collect())
}

/// Tab-separated `stat, bin_lo, bin_hi, count` rows.
pub fn histograms_to_tsv(histograms: &[Histogram]) -> String {
    let mut out = String::from("stat\tbin_lo\tbin_hi\tcount\n");
    for h in histograms {
        for (b, count) in h.counts.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", h.stat, h.edges[b], h.edges[b + 1], count)
                .expect("writing to a String cannot fail");
        }
    }
    out
}
