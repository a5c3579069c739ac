//! Type I error, power and P-value uniformity studies.
//!
//! A study simulates one reference table from the null model, builds the
//! null distribution of the test statistic once, and then evaluates
//! `n_datasets` observed datasets drawn from the truth model against that
//! shared table and null distribution.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gof::{null_distribution_prior, p_value, posterior_replicates, PosteriorNull, StatisticKind};
use crate::rejection::reject_values;
use crate::rng::Seed;
use crate::scaling::fit_scaling;
use crate::sim::{prior_predictive, simulate_table, ModelSpec};
use crate::table::ReferenceTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudyConfig {
    pub null_model: ModelSpec,
    pub truth_model: ModelSpec,
    pub statistic: StatisticKind,
    pub n_sims: usize,
    pub acceptance_rate: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub n_prime: usize,
    pub n_datasets: usize,
    pub alpha: f64,
    pub master_seed: Seed,
}

impl PowerStudyConfig {
    /// Desk-scale defaults: 10^4 simulations, 1% acceptance, 500 datasets,
    /// M = 500, n' = 100, alpha = 0.05.
    pub fn new(null_model: ModelSpec, truth_model: ModelSpec, statistic: StatisticKind, seed: Seed) -> Self {
        Self {
            null_model,
            truth_model,
            statistic,
            n_sims: 10_000,
            acceptance_rate: 0.01,
            m: 500,
            n_prime: 100,
            n_datasets: 500,
            alpha: 0.05,
            master_seed: seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_sims == 0 || self.m == 0 || self.n_prime == 0 || self.n_datasets == 0 {
            return Err(Error::InvalidArgument("study counts must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudyResult {
    pub rejection_rate: f64,
    pub rejections: usize,
    pub p_values: Vec<f64>,
    pub ks_statistic: f64,
    /// KS P-value against U(0, 1); meaningful when the truth is the null.
    pub ks_uniformity_p: f64,
    pub config: PowerStudyConfig,
}

impl PowerStudyResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("PowerStudyResult is always serializable")
    }
}

/// Type I error study: the truth is the null model.
pub fn run_calibration(config: &PowerStudyConfig) -> Result<PowerStudyResult> {
    if config.null_model != config.truth_model {
        return Err(Error::InvalidArgument("calibration needs the same null and truth model".into()));
    }
    run_study(config)
}

/// Power study: datasets come from a model other than the null.
pub fn run_power(config: &PowerStudyConfig) -> Result<PowerStudyResult> {
    if config.null_model == config.truth_model {
        return Err(Error::InvalidArgument("power study needs distinct null and truth models".into()));
    }
    run_study(config)
}

/// Reference table shared by every dataset of the study.
pub fn study_table(config: &PowerStudyConfig) -> Result<ReferenceTable> {
    let sim = config.null_model.build()?;
    simulate_table(sim.as_ref(), config.n_sims, config.master_seed.domain(b"table"))
}

/// Observed statistics of dataset `j`.
pub fn study_dataset(config: &PowerStudyConfig, j: usize) -> Result<Vec<f64>> {
    let truth = config.truth_model.build()?;
    let mut rng = config.master_seed.domain(b"datasets").child(j as u64).rng();
    Ok(prior_predictive(truth.as_ref(), &mut rng)?.1)
}

pub fn run_study(config: &PowerStudyConfig) -> Result<PowerStudyResult> {
    config.validate()?;
    let null_sim = config.null_model.build()?;
    let truth_sim = config.truth_model.build()?;
    if null_sim.stat_names() != truth_sim.stat_names() {
        return Err(Error::NameMismatch(format!(
            "null statistics {:?} vs truth statistics {:?}",
            null_sim.stat_names(),
            truth_sim.stat_names()
        )));
    }
    let table = study_table(config)?;
    let scaling = fit_scaling(&table)?;
    let rate = config.acceptance_rate;
    let seed = config.master_seed;

    let datasets = (0..config.n_datasets)
        .into_par_iter()
        .map(|j| study_dataset(config, j))
        .collect::<Result<Vec<_>>>()?;

    let p_values = match config.statistic {
        StatisticKind::Prior => {
            let nulls = null_distribution_prior(&table, &scaling, rate, config.m, seed.domain(b"null"))?;
            datasets
                .par_iter()
                .map(|obs| {
                    let d = reject_values(&table, obs, &scaling, rate, None)?.mean_distance();
                    Ok(p_value(d, &nulls))
                })
                .collect::<Result<Vec<_>>>()?
        }
        StatisticKind::Post => {
            let null = PosteriorNull::simulate(
                &table,
                &scaling,
                rate,
                null_sim.as_ref(),
                config.n_prime,
                config.m,
                seed.domain(b"null"),
            )?;
            let streams = seed.domain(b"observed-replicates");
            datasets
                .par_iter()
                .enumerate()
                .map(|(j, obs)| {
                    let reps = posterior_replicates(
                        &table,
                        obs,
                        &scaling,
                        rate,
                        None,
                        null_sim.as_ref(),
                        config.n_prime,
                        streams.child(j as u64),
                    )?;
                    let (d, nulls) = null.score(obs, &reps)?;
                    Ok(p_value(d, &nulls))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    let rejections = p_values.iter().filter(|&&p| p < config.alpha).count();
    let (ks_statistic, ks_uniformity_p) = ks_uniform(&p_values);
    Ok(PowerStudyResult {
        rejection_rate: rejections as f64 / p_values.len() as f64,
        rejections,
        p_values,
        ks_statistic,
        ks_uniformity_p,
        config: config.clone(),
    })
}

/// Kolmogorov distribution tail `P(K > lambda)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against U(0, 1): the statistic and
/// its asymptotic P-value with Stephens' small-sample correction.
pub fn ks_uniform(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / nf - u).max(u - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let root = nf.sqrt();
    (d, kolmogorov_tail((root + 0.12 + 0.11 / root) * d))
}

/// One-sided two-proportion z-test of `x1 / n1 > x2 / n2`; returns the
/// P-value.
pub fn two_proportion_test(x1: usize, n1: usize, x2: usize, n2: usize) -> f64 {
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return if p1 > p2 { 0.0 } else { 1.0 };
    }
    let z = (p1 - p2) / se;
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Counts of P-values in `bins` equal-width bins on [0, 1]; P = 1 falls in
/// the last bin.
pub fn pvalue_histogram(p_values: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    let mut counts = vec![0; bins];
    for &p in p_values {
        let b = ((p.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(counts)
}

/// `bin_lo, bin_hi, count` TSV of the study's P-values.
pub fn emit_pvalue_histogram(result: &PowerStudyResult, bins: usize) -> Result<String> {
    let counts = pvalue_histogram(&result.p_values, bins)?;
    let mut out = String::from("bin_lo\tbin_hi\tcount\n");
    for (b, c) in counts.iter().enumerate() {
        writeln!(out, "{}\t{}\t{}", b as f64 / bins as f64, (b + 1) as f64 / bins as f64, c)
            .expect("writing to a String cannot fail");
    }
    Ok(out)
}
