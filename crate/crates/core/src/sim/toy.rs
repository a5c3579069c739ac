//! Gaussian and Laplace samples summarized by their first four moments.
//!
//! Prior: location ~ U(-10, 10), variance ~ 1 / chi^2(3). The Laplace scale
//! is `sqrt(variance / 2)` so both families share the same variance.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sim::Simulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyModel {
    pub family: Family,
    pub sample_size: usize,
}

impl ToyModel {
    pub const LOCATION_RANGE: (f64, f64) = (-10.0, 10.0);
    pub const VARIANCE_DOF: f64 = 3.0;

    pub fn new(family: Family, sample_size: usize) -> Result<Self> {
        if sample_size < 4 {
            return Err(Error::InvalidArgument(format!(
                "toy sample size must be at least 4, got {sample_size}"
            )));
        }
        Ok(Self {
            family,
            sample_size,
        })
    }

    /// Raw sample for `theta = (location, variance)`.
    pub fn draw_sample(&self, theta: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        let [location, variance] = *theta else {
            return Err(Error::InvalidArgument(format!(
                "toy model expects 2 parameters, got {}",
                theta.len()
            )));
        };
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
        }
        let sample = match self.family {
            Family::Gaussian => {
                let sd = variance.sqrt();
                (0..self.sample_size)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        location + sd * z
                    })
                    .collect()
            }
            Family::Laplace => {
                let b = (variance / 2.0).sqrt();
                (0..self.sample_size)
                    .map(|_| location + b * laplace_unit(rng))
                    .collect()
            }
        };
        Ok(sample)
    }
}

/// Standard Laplace draw by inverting the CDF.
fn laplace_unit(rng: &mut SimRng) -> f64 {
    // u in (-1/2, 1/2]; 1 - 2|u| lies in [0, 1) and hits 0 with probability 2^-53.
    let u: f64 = 0.5 - rng.random::<f64>();
    let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -u.signum() * tail.ln()
}

/// Mean, unbiased variance, skewness `m3 / m2^1.5` and kurtosis `m4 / m2^2`
/// with biased central moments.
pub fn moment_stats(sample: &[f64]) -> [f64; 4] {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in sample {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / (n - 1.0);
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    [mean, variance, m3 / m2.powf(1.5), m4 / (m2 * m2)]
}

impl Simulator for ToyModel {
    fn param_names(&self) -> Vec<String> {
        vec!["location".into(), "variance".into()]
    }

    fn stat_names(&self) -> Vec<String> {
        ["mean", "variance", "skewness", "kurtosis"]
            .map(String::from)
            .to_vec()
    }

    fn draw_prior(&self, rng: &mut SimRng) -> Vec<f64> {
        let (lo, hi) = Self::LOCATION_RANGE;
        let location = rng.random_range(lo..hi);
        let chi2 = ChiSquared::new(Self::VARIANCE_DOF).expect("positive degrees of freedom");
        let variance = 1.0 / chi2.sample(rng);
        vec![location, variance]
    }

    fn in_support(&self, theta: &[f64]) -> bool {
        theta.len() == 2 && theta[0].is_finite() && theta[1] > 0.0 && theta[1].is_finite()
    }

    fn simulate(&self, theta: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        let sample = self.draw_sample(theta, rng)?;
        Ok(moment_stats(&sample).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use statrs::distribution::{ChiSquared as ChiSq, ContinuousCDF};

    #[test]
    fn three_point_sample() {
        let [m, v, s, _] = moment_stats(&[1.0, 2.0, 3.0]);
        assert_eq!((m, v, s), (2.0, 1.0, 0.0));
    }

    #[test]
    fn sample_size_guard() {
        assert!(ToyModel::new(Family::Gaussian, 3).is_err());
        let m = ToyModel::new(Family::Gaussian, 10).unwrap();
        assert!(m.simulate(&[0.0, 0.0], &mut Seed(1).rng()).is_err());
        assert!(m.simulate(&[0.0, -1.0], &mut Seed(1).rng()).is_err());
    }

    #[test]
    fn prior_location() {
        let m = ToyModel::new(Family::Gaussian, 50).unwrap();
        let mut rng = Seed(21).rng();
        let locs: Vec<f64> = (0..100_000).map(|_| m.draw_prior(&mut rng)[0]).collect();
        let mean = locs.iter().sum::<f64>() / locs.len() as f64;
        assert!(mean.abs() < 0.05, "{mean}");
        assert!(locs.iter().all(|l| (-10.0..10.0).contains(l)));
    }

    #[test]
    fn prior_variance_median() {
        let m = ToyModel::new(Family::Laplace, 50).unwrap();
        let mut rng = Seed(22).rng();
        let mut vars: Vec<f64> = (0..100_000).map(|_| m.draw_prior(&mut rng)[1]).collect();
        vars.sort_by(f64::total_cmp);
        let median = (vars[49_999] + vars[50_000]) / 2.0;
        let expected = 1.0 / ChiSq::new(3.0).unwrap().inverse_cdf(0.5);
        assert!((expected - 0.4226).abs() < 1e-3);
        assert!((median / expected - 1.0).abs() < 0.02, "{median} vs {expected}");
    }

    #[test]
    fn deterministic_per_seed() {
        let m = ToyModel::new(Family::Laplace, 50).unwrap();
        let a = m.draw_prior(&mut Seed(3).rng());
        let b = m.draw_prior(&mut Seed(3).rng());
        assert_eq!(a, b);
        let s1 = m.simulate(&a, &mut Seed(4).rng()).unwrap();
        let s2 = m.simulate(&a, &mut Seed(4).rng()).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn large_sample_kurtosis() {
        let g = ToyModel::new(Family::Gaussian, 1_000_000).unwrap();
        let k = g.simulate(&[1.0, 2.0], &mut Seed(5).rng()).unwrap()[3];
        assert!((k - 3.0).abs() < 0.05, "{k}");
        let l = ToyModel::new(Family::Laplace, 1_000_000).unwrap();
        let stats = l.simulate(&[1.0, 2.0], &mut Seed(6).rng()).unwrap();
        assert!((stats[3] - 6.0).abs() < 0.1, "{}", stats[3]);
        assert!((stats[1] / 2.0 - 1.0).abs() < 0.01, "{}", stats[1]);
    }

    #[test]
    fn location_shift_moves_only_the_mean() {
        for family in [Family::Gaussian, Family::Laplace] {
            let m = ToyModel::new(family, 200).unwrap();
            let a = m.simulate(&[0.5, 1.3], &mut Seed(7).rng()).unwrap();
            let b = m.simulate(&[3.5, 1.3], &mut Seed(7).rng()).unwrap();
            assert!((b[0] - a[0] - 3.0).abs() < 1e-12);
            for j in 1..4 {
                assert!((a[j] - b[j]).abs() < 1e-9 * (1.0 + a[j].abs()), "{j}");
            }
        }
    }

    #[test]
    fn shape_statistics_scale_free() {
        let m = ToyModel::new(Family::Laplace, 500).unwrap();
        let x = m.draw_sample(&[0.0, 1.0], &mut Seed(8).rng()).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v * 7.25).collect();
        let (a, b) = (moment_stats(&x), moment_stats(&y));
        assert!((a[2] - b[2]).abs() < 1e-12);
        assert!((a[3] - b[3]).abs() < 1e-12);
    }
}
