//! Goodness-of-fit statistics and their Monte Carlo P-values.
//!
//! `D_prior` is the mean scaled distance between the observed statistics and
//! the accepted simulations of the rejection step. `D_post` is the mean
//! distance between the observed statistics and `n'` statistics simulated
//! from regression-adjusted posterior draws. Both are calibrated against the
//! same statistic computed on pseudo-observed datasets: rows of the
//! reference table treated in turn as the data, with that row left out of
//! the table.

use log::warn;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjust::{adjust_values, sample_posterior, PosteriorSample};
use crate::error::{Error, Result};
use crate::rejection::{check_rate, reject_values};
use crate::rng::Seed;
use crate::scaling::{fit_scaling, mad, ScalingVector};
use crate::sim::{simulate_checked, Simulator};
use crate::table::{ObservedStats, ReferenceTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticKind {
    Prior,
    Post,
}

/// Outcome of a goodness-of-fit test, serialized as the JSON result format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub kind: StatisticKind,
    #[serde(rename = "observed_D")]
    pub observed_d: f64,
    pub p_value: f64,
    /// `(1 + count) / (1 + M)`; informational only.
    pub p_value_conservative: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub acceptance_rate: f64,
    pub n_prime: Option<usize>,
    pub seed: Seed,
    pub null_values: Vec<f64>,
}

impl GofResult {
    fn new(
        kind: StatisticKind,
        observed_d: f64,
        null_values: Vec<f64>,
        acceptance_rate: f64,
        n_prime: Option<usize>,
        seed: Seed,
    ) -> Self {
        Self {
            kind,
            observed_d,
            p_value: p_value(observed_d, &null_values),
            p_value_conservative: conservative_p_value(observed_d, &null_values),
            m: null_values.len(),
            acceptance_rate,
            n_prime,
            seed,
            null_values,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("GofResult is always serializable")
    }
}

fn count_at_least(observed: f64, nulls: &[f64]) -> usize {
    nulls.iter().filter(|&&d| d >= observed).count()
}

/// Fraction of null statistics greater than or equal to `observed`.
/// `NaN` for an empty null sample.
pub fn p_value(observed: f64, nulls: &[f64]) -> f64 {
    count_at_least(observed, nulls) as f64 / nulls.len() as f64
}

/// `(1 + #{null >= observed}) / (1 + M)`, which never reaches zero.
pub fn conservative_p_value(observed: f64, nulls: &[f64]) -> f64 {
    (1 + count_at_least(observed, nulls)) as f64 / (1 + nulls.len()) as f64
}

/// Mean distance of the accepted simulations to `observed`.
pub fn d_prior(
    table: &ReferenceTable,
    observed: &ObservedStats,
    scaling: &ScalingVector,
    rate: f64,
    exclude: Option<usize>,
) -> Result<f64> {
    observed.ensure_matches(table)?;
    d_prior_values(table, observed.values(), scaling, rate, exclude)
}

fn d_prior_values(
    table: &ReferenceTable,
    observed: &[f64],
    scaling: &ScalingVector,
    rate: f64,
    exclude: Option<usize>,
) -> Result<f64> {
    Ok(reject_values(table, observed, scaling, rate, exclude)?.mean_distance())
}

/// `m` distinct pseudo-observed rows out of `n`; every row, in order, when
/// `m == n`.
pub fn pseudo_observed_rows(n: usize, m: usize, seed: Seed) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if m > n {
        return Err(Error::TooManyReplicates { m, n });
    }
    if m == n {
        return Ok((0..n).collect());
    }
    let mut rng = seed.domain(b"pseudo-observed").rng();
    Ok(index::sample(&mut rng, n, m).into_vec())
}

/// Leave-one-out `D_prior` for `m` pseudo-observed rows. The scaling is the
/// global one, not refit without the left-out row.
pub fn null_distribution_prior(
    table: &ReferenceTable,
    scaling: &ScalingVector,
    rate: f64,
    m: usize,
    seed: Seed,
) -> Result<Vec<f64>> {
    check_rate(rate)?;
    let rows = pseudo_observed_rows(table.n_rows(), m, seed)?;
    rows.par_iter()
        .map(|&r| d_prior_values(table, table.stat_row(r), scaling, rate, Some(r)))
        .collect()
}

/// `D_prior` test of `observed` against `table`.
pub fn gfit(
    table: &ReferenceTable,
    observed: &ObservedStats,
    rate: f64,
    m: usize,
    seed: Seed,
) -> Result<GofResult> {
    observed.ensure_matches(table)?;
    let scaling = fit_scaling(table)?;
    let observed_d = d_prior_values(table, observed.values(), &scaling, rate, None)?;
    let nulls = null_distribution_prior(table, &scaling, rate, m, seed)?;
    Ok(GofResult::new(StatisticKind::Prior, observed_d, nulls, rate, None, seed))
}

/// Posterior-predictive replicates, one statistic vector per row.
pub type Replicates = Vec<Vec<f64>>;

fn check_simulator(table: &ReferenceTable, sim: &dyn Simulator) -> Result<()> {
    if sim.stat_names() != table.stat_names() {
        return Err(Error::NameMismatch(format!(
            "simulator statistics {:?} vs table {:?}",
            sim.stat_names(),
            table.stat_names()
        )));
    }
    if sim.param_names() != table.param_names() {
        return Err(Error::NameMismatch(format!(
            "simulator parameters {:?} vs table {:?}",
            sim.param_names(),
            table.param_names()
        )));
    }
    Ok(())
}

/// Rejection, regression adjustment, `n_prime` weighted posterior draws and
/// one simulation per draw, all from the single stream `seed`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn posterior_replicates(
    table: &ReferenceTable,
    observed: &[f64],
    scaling: &ScalingVector,
    rate: f64,
    exclude: Option<usize>,
    sim: &dyn Simulator,
    n_prime: usize,
    seed: Seed,
) -> Result<Replicates> {
    let accepted = reject_values(table, observed, scaling, rate, exclude)?;
    let mut posterior = adjust_values(table, &accepted, observed, scaling)?;
    if posterior.adjusted {
        posterior = match posterior.restrict(|theta| sim.in_support(theta)) {
            Some(p) => p,
            None => {
                warn!("every adjusted draw lies outside the simulator's support; using unadjusted parameters");
                let rows = accepted.indices.iter().map(|&i| table.param_row(i).to_vec()).collect();
                PosteriorSample::from_rows(rows, posterior.weights.clone())?
            }
        };
    }
    let mut rng = seed.rng();
    let draws = sample_posterior(&posterior, n_prime, &mut rng)?;
    let k = table.n_stats();
    draws
        .iter()
        .map(|theta| simulate_checked(sim, theta, k, &mut rng))
        .collect()
}

/// MAD of each statistic over every pooled replicate. A zero MAD falls back
/// to the prior-table scale of that statistic.
pub fn fit_posterior_scaling<'a>(
    pools: impl IntoIterator<Item = &'a Replicates>,
    prior: &ScalingVector,
) -> Result<ScalingVector> {
    let k = prior.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); k];
    for pool in pools {
        for row in pool {
            if row.len() != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    actual: row.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
    }
    let scales = columns
        .iter()
        .zip(prior.scales())
        .map(|(col, &fallback)| {
            let s = mad(col)?;
            Ok(if s > 0.0 { s } else { fallback })
        })
        .collect::<Result<Vec<_>>>()?;
    ScalingVector::from_scales(scales)
}

fn mean_distance(replicates: &Replicates, observed: &[f64], scaling: &ScalingVector) -> f64 {
    replicates.iter().map(|r| scaling.dist(r, observed)).sum::<f64>() / replicates.len() as f64
}

fn check_n_prime(n_prime: usize) -> Result<()> {
    if n_prime == 0 {
        return Err(Error::InvalidArgument("n' must be at least 1".into()));
    }
    Ok(())
}

/// `D_post` of a single dataset, with the replicate scaling fit on its own
/// `n_prime` replicates. Returns the statistic and the raw replicates.
#[allow(clippy::too_many_arguments)]
pub fn d_post(
    table: &ReferenceTable,
    observed: &ObservedStats,
    scaling: &ScalingVector,
    rate: f64,
    sim: &dyn Simulator,
    n_prime: usize,
    seed: Seed,
) -> Result<(f64, Replicates)> {
    observed.ensure_matches(table)?;
    check_simulator(table, sim)?;
    check_n_prime(n_prime)?;
    let reps = posterior_replicates(table, observed.values(), scaling, rate, None, sim, n_prime, seed)?;
    let post_scaling = fit_posterior_scaling([&reps], scaling)?;
    Ok((mean_distance(&reps, observed.values(), &post_scaling), reps))
}

/// Posterior-predictive replicates of `M` pseudo-observed datasets.
///
/// Distances are computed in a second pass, once every replicate exists, so
/// that a single scaling fitted on the pooled replicates applies to all of
/// them. Replicate streams are keyed by table row, so the values do not
/// depend on the order of the pseudo-observed rows or on the worker count.
#[derive(Debug, Clone)]
pub struct PosteriorNull {
    pub rows: Vec<usize>,
    pub replicates: Vec<Replicates>,
    pseudo_observed: Vec<Vec<f64>>,
    prior_scaling: ScalingVector,
}

impl PosteriorNull {
    #[allow(clippy::too_many_arguments)]
    pub fn simulate(
        table: &ReferenceTable,
        scaling: &ScalingVector,
        rate: f64,
        sim: &dyn Simulator,
        n_prime: usize,
        m: usize,
        seed: Seed,
    ) -> Result<Self> {
        let rows = pseudo_observed_rows(table.n_rows(), m, seed)?;
        Self::simulate_rows(table, scaling, rate, sim, n_prime, rows, seed)
    }

    /// Same as [`PosteriorNull::simulate`] for an explicit list of rows.
    #[allow(clippy::too_many_arguments)]
    pub fn simulate_rows(
        table: &ReferenceTable,
        scaling: &ScalingVector,
        rate: f64,
        sim: &dyn Simulator,
        n_prime: usize,
        rows: Vec<usize>,
        seed: Seed,
    ) -> Result<Self> {
        check_rate(rate)?;
        check_simulator(table, sim)?;
        check_n_prime(n_prime)?;
        if let Some(&r) = rows.iter().find(|&&r| r >= table.n_rows()) {
            return Err(Error::InvalidArgument(format!("pseudo-observed row {r} out of range")));
        }
        let streams = seed.domain(b"posterior-null");
        let replicates = rows
            .par_iter()
            .map(|&r| {
                posterior_replicates(
                    table,
                    table.stat_row(r),
                    scaling,
                    rate,
                    Some(r),
                    sim,
                    n_prime,
                    streams.child(r as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let pseudo_observed = rows.iter().map(|&r| table.stat_row(r).to_vec()).collect();
        Ok(Self {
            rows,
            replicates,
            pseudo_observed,
            prior_scaling: scaling.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn values_with(&self, scaling: &ScalingVector) -> Vec<f64> {
        self.replicates
            .iter()
            .zip(&self.pseudo_observed)
            .map(|(reps, obs)| mean_distance(reps, obs, scaling))
            .collect()
    }

    /// Null `D_post` values with the scaling fitted on the `M x n'` pool.
    pub fn null_values(&self) -> Result<Vec<f64>> {
        let scaling = fit_posterior_scaling(&self.replicates, &self.prior_scaling)?;
        Ok(self.values_with(&scaling))
    }

    /// Observed `D_post` and the null values, all scaled by the MAD of the
    /// null pool joined with the observed dataset's own replicates.
    pub fn score(&self, observed: &[f64], observed_replicates: &Replicates) -> Result<(f64, Vec<f64>)> {
        let scaling = fit_posterior_scaling(
            self.replicates.iter().chain(std::iter::once(observed_replicates)),
            &self.prior_scaling,
        )?;
        Ok((
            mean_distance(observed_replicates, observed, &scaling),
            self.values_with(&scaling),
        ))
    }
}

/// Null distribution of `D_post` over `m` pseudo-observed rows.
#[allow(clippy::too_many_arguments)]
pub fn null_distribution_post(
    table: &ReferenceTable,
    scaling: &ScalingVector,
    rate: f64,
    sim: &dyn Simulator,
    n_prime: usize,
    m: usize,
    seed: Seed,
) -> Result<Vec<f64>> {
    PosteriorNull::simulate(table, scaling, rate, sim, n_prime, m, seed)?.null_values()
}

/// Output of [`gfit_post`]: the test result plus the observed dataset's
/// posterior-predictive replicates, reused by posterior predictive checks.
#[derive(Debug, Clone)]
pub struct PostFit {
    pub result: GofResult,
    pub replicates: Replicates,
}

/// `D_post` test of `observed` against `table` and `sim`.
#[allow(clippy::too_many_arguments)]
pub fn gfit_post(
    table: &ReferenceTable,
    observed: &ObservedStats,
    rate: f64,
    sim: &dyn Simulator,
    n_prime: usize,
    m: usize,
    seed: Seed,
) -> Result<PostFit> {
    observed.ensure_matches(table)?;
    let scaling = fit_scaling(table)?;
    let null = PosteriorNull::simulate(table, &scaling, rate, sim, n_prime, m, seed)?;
    let replicates = posterior_replicates(
        table,
        observed.values(),
        &scaling,
        rate,
        None,
        sim,
        n_prime,
        seed.domain(b"posterior-observed"),
    )?;
    let (observed_d, nulls) = null.score(observed.values(), &replicates)?;
    Ok(PostFit {
        result: GofResult::new(StatisticKind::Post, observed_d, nulls, rate, Some(n_prime), seed),
        replicates,
    })
}
