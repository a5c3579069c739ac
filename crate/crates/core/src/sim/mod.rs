//! Simulators: the generating mechanism `p(s | theta)` plus its prior.

pub mod coalescent;
pub mod toy;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{Seed, SimRng};
use crate::table::ReferenceTable;

pub use coalescent::{CoalescentModel, DemographyLabel, StatSet};
pub use toy::{Family, ToyModel};

/// A model that can draw parameters from its prior and simulate summary
/// statistics for a parameter vector.
///
/// `simulate` must be a pure function of `(theta, rng state)` and return
/// statistics in the order of `stat_names`. Implementations are shared
/// across worker threads; each worker brings its own generator.
pub trait Simulator: Send + Sync {
    fn param_names(&self) -> Vec<String>;
    fn stat_names(&self) -> Vec<String>;
    fn draw_prior(&self, rng: &mut SimRng) -> Vec<f64>;
    fn simulate(&self, theta: &[f64], rng: &mut SimRng) -> Result<Vec<f64>>;

    /// Whether `theta` lies in the parameter space the simulator accepts.
    /// Adjusted posterior draws outside it are discarded before simulation.
    fn in_support(&self, _theta: &[f64]) -> bool {
        true
    }
}

/// Runs the simulator and checks the shape of its output, attaching `theta`
/// to any failure.
pub(crate) fn simulate_checked(
    sim: &dyn Simulator,
    theta: &[f64],
    k: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let out = sim.simulate(theta, rng).map_err(|e| match e {
        e @ Error::Simulation { .. } => e,
        other => Error::Simulation {
            theta: theta.to_vec(),
            message: other.to_string(),
        },
    })?;
    if out.len() != k {
        return Err(Error::Simulation {
            theta: theta.to_vec(),
            message: format!("simulator returned {} statistics, expected {k}", out.len()),
        });
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Simulation {
            theta: theta.to_vec(),
            message: "simulator returned a non-finite statistic".into(),
        });
    }
    Ok(out)
}

/// One prior-predictive draw: `(theta, s)`.
pub fn prior_predictive(sim: &dyn Simulator, rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)> {
    let theta = sim.draw_prior(rng);
    let stats = simulate_checked(sim, &theta, sim.stat_names().len(), rng)?;
    Ok((theta, stats))
}

/// Simulates an `n`-row reference table. Row `i` uses the stream
/// `seed.child(i)`, so the table does not depend on the thread count.
pub fn simulate_table(sim: &dyn Simulator, n: usize, seed: Seed) -> Result<ReferenceTable> {
    let k = sim.stat_names().len();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.child(i as u64).rng();
            let theta = sim.draw_prior(&mut rng);
            let stats = simulate_checked(sim, &theta, k, &mut rng)?;
            Ok((theta, stats))
        })
        .collect::<Result<Vec<_>>>()?;
    ReferenceTable::from_rows(sim.param_names(), sim.stat_names(), rows)
}

/// Built-in model identifiers as accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    ToyGaussian,
    ToyLaplace,
    Constant,
    Bottleneck,
    Expansion,
}

impl ModelKind {
    pub fn is_toy(self) -> bool {
        matches!(self, ModelKind::ToyGaussian | ModelKind::ToyLaplace)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::ToyGaussian => "toy-gaussian",
            ModelKind::ToyLaplace => "toy-laplace",
            ModelKind::Constant => "constant",
            ModelKind::Bottleneck => "bottleneck",
            ModelKind::Expansion => "expansion",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "toy-gaussian" => ModelKind::ToyGaussian,
            "toy-laplace" => ModelKind::ToyLaplace,
            "constant" => ModelKind::Constant,
            "bottleneck" => ModelKind::Bottleneck,
            "expansion" => ModelKind::Expansion,
            other => return Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        })
    }
}

/// A fully specified built-in model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Sample size of the toy models; ignored for coalescent models.
    pub sample_size: usize,
    /// Statistic set of the coalescent models; ignored for toy models.
    pub stats: StatSet,
}

impl ModelSpec {
    pub fn toy(family: Family, sample_size: usize) -> Self {
        let kind = match family {
            Family::Gaussian => ModelKind::ToyGaussian,
            Family::Laplace => ModelKind::ToyLaplace,
        };
        Self {
            kind,
            sample_size,
            stats: StatSet::PiTajima,
        }
    }

    pub fn coalescent(label: DemographyLabel, stats: StatSet) -> Self {
        let kind = match label {
            DemographyLabel::Constant => ModelKind::Constant,
            DemographyLabel::Bottleneck => ModelKind::Bottleneck,
            DemographyLabel::Expansion => ModelKind::Expansion,
        };
        Self {
            kind,
            sample_size: 50,
            stats,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Simulator>> {
        Ok(match self.kind {
            ModelKind::ToyGaussian => Box::new(ToyModel::new(Family::Gaussian, self.sample_size)?),
            ModelKind::ToyLaplace => Box::new(ToyModel::new(Family::Laplace, self.sample_size)?),
            ModelKind::Constant => Box::new(CoalescentModel::new(DemographyLabel::Constant, self.stats)),
            ModelKind::Bottleneck => Box::new(CoalescentModel::new(DemographyLabel::Bottleneck, self.stats)),
            ModelKind::Expansion => Box::new(CoalescentModel::new(DemographyLabel::Expansion, self.stats)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for kind in [
            ModelKind::ToyGaussian,
            ModelKind::ToyLaplace,
            ModelKind::Constant,
            ModelKind::Bottleneck,
            ModelKind::Expansion,
        ] {
            assert_eq!(kind.as_str().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("gamma".parse::<ModelKind>().is_err());
    }

    #[test]
    fn table_independent_of_thread_count() {
        let sim = ToyModel::new(Family::Gaussian, 20).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| simulate_table(&sim, 300, Seed(8)).unwrap());
        let b = four.install(|| simulate_table(&sim, 300, Seed(8)).unwrap());
        assert_eq!(a, b);
    }
}
