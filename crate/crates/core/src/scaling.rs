//! Robust per-statistic scaling and the scaled Euclidean distance.

use log::warn;

use crate::error::{Error, Result};
use crate::table::ReferenceTable;

/// Consistency constant making the MAD estimate the standard deviation of a
/// Gaussian.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Median of `values`, reordering the buffer in place.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (lower, upper_mid, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper_mid = *upper_mid;
    if n % 2 == 1 {
        upper_mid
    } else {
        let lower_mid = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower_mid + upper_mid) / 2.0
    }
}

/// Median absolute deviation scaled by [`MAD_CONSISTENCY`].
pub fn mad(column: &[f64]) -> Result<f64> {
    if column.is_empty() {
        return Err(Error::EmptyColumn);
    }
    let mut buf = column.to_vec();
    let center = median_in_place(&mut buf);
    for (b, &x) in buf.iter_mut().zip(column) {
        *b = (x - center).abs();
    }
    Ok(MAD_CONSISTENCY * median_in_place(&mut buf))
}

/// Per-statistic scales. Statistics with a zero scale are dropped from every
/// distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVector {
    scales: Vec<f64>,
    dropped: Vec<usize>,
    inv: Vec<(usize, f64)>,
}

impl ScalingVector {
    pub fn from_scales(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::EmptyColumn);
        }
        if let Some(s) = scales.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidArgument(format!("invalid scale {s}")));
        }
        let dropped: Vec<usize> = (0..scales.len()).filter(|&j| scales[j] == 0.0).collect();
        if dropped.len() == scales.len() {
            return Err(Error::NoInformativeStatistics);
        }
        let inv = scales
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .map(|(j, &s)| (j, 1.0 / s))
            .collect();
        Ok(Self {
            scales,
            dropped,
            inv,
        })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Indices of the statistics that take part in distances.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.inv.iter().map(|&(j, _)| j)
    }

    /// Scaled distance without length checks; callers guarantee that both
    /// vectors live in this scaling's statistic space.
    #[inline]
    pub(crate) fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        self.inv
            .iter()
            .map(|&(j, inv)| {
                let d = (a[j] - b[j]) * inv;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// MAD of every statistic column, dropping zero-MAD columns with a warning.
pub fn fit_scaling(table: &ReferenceTable) -> Result<ScalingVector> {
    let scales = (0..table.n_stats())
        .map(|j| mad(&table.stat_column(j)))
        .collect::<Result<Vec<_>>>()?;
    let scaling = ScalingVector::from_scales(scales)?;
    if !scaling.dropped().is_empty() {
        let names: Vec<&str> = scaling
            .dropped()
            .iter()
            .map(|&j| table.stat_names()[j].as_str())
            .collect();
        warn!("dropping statistics with zero MAD: {}", names.join(", "));
    }
    Ok(scaling)
}

/// Euclidean distance over the non-dropped statistics after dividing each
/// coordinate by its scale.
pub fn distance(a: &[f64], b: &[f64], scaling: &ScalingVector) -> Result<f64> {
    if a.len() != scaling.len() {
        return Err(Error::LengthMismatch {
            expected: scaling.len(),
            actual: a.len(),
        });
    }
    if b.len() != scaling.len() {
        return Err(Error::LengthMismatch {
            expected: scaling.len(),
            actual: b.len(),
        });
    }
    Ok(scaling.dist(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Sorts explicitly instead of using selection.
    fn mad_oracle(x: &[f64]) -> f64 {
        fn med(v: &mut Vec<f64>) -> f64 {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                (v[n / 2 - 1] + v[n / 2]) / 2.0
            }
        }
        let m = med(&mut x.to_vec());
        let mut dev: Vec<f64> = x.iter().map(|v| (v - m).abs()).collect();
        1.4826 * med(&mut dev)
    }

    fn one_col(values: &[f64]) -> ReferenceTable {
        ReferenceTable::new(vec![], vec!["s".into()], vec![], values.to_vec()).unwrap()
    }

    #[test]
    fn mad_examples() {
        assert_eq!(mad(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), 1.4826);
        assert_eq!(mad_oracle(&[1.0, 2.0, 3.0, 4.0, 5.0]), 1.4826);
        assert_eq!(mad(&[-3.0, -3.0, -3.0, 7.0]).unwrap(), 0.0);
        assert_eq!(mad_oracle(&[-3.0, -3.0, -3.0, 7.0]), 0.0);
        assert!(matches!(mad(&[]), Err(Error::EmptyColumn)));
    }

    #[test]
    fn fit_drops_constant_column() {
        let t = ReferenceTable::new(
            vec![],
            vec!["c".into(), "v".into()],
            vec![],
            vec![1.0, 1.0, 1.0, 2.0, 1.0, 5.0],
        )
        .unwrap();
        let s = fit_scaling(&t).unwrap();
        assert_eq!(s.dropped(), [0]);
        assert!(s.scales()[1] > 0.0);
    }

    #[test]
    fn fit_single_column() {
        let s = fit_scaling(&one_col(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!(s.scales(), [1.4826]);
    }

    #[test]
    fn fit_all_constant_errors() {
        assert!(matches!(
            fit_scaling(&one_col(&[2.0, 2.0, 2.0])),
            Err(Error::NoInformativeStatistics)
        ));
    }

    #[test]
    fn fit_standard_normal_scales_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let stats: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let t = ReferenceTable::new(vec![], vec!["a".into(), "b".into()], vec![], stats).unwrap();
        for s in fit_scaling(&t).unwrap().scales() {
            assert!((0.9..=1.1).contains(s), "{s}");
        }
    }

    #[test]
    fn distance_examples() {
        let ones = ScalingVector::from_scales(vec![1.0, 1.0]).unwrap();
        assert_eq!(distance(&[1.5, -2.0], &[1.5, -2.0], &ones).unwrap(), 0.0);
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0], &ones).unwrap(), 5.0);
        let s = ScalingVector::from_scales(vec![3.0, 2.0]).unwrap();
        let d = distance(&[0.0, 0.0], &[3.0, 4.0], &s).unwrap();
        assert!((d - 5f64.sqrt()).abs() < 1e-15);
        assert!(distance(&[0.0], &[3.0, 4.0], &s).is_err());
    }

    #[test]
    fn dropped_coordinates_ignored() {
        let s = ScalingVector::from_scales(vec![0.0, 2.0]).unwrap();
        assert_eq!(distance(&[100.0, 1.0], &[-5.0, 1.0], &s).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn mad_matches_sorting_oracle(x in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            prop_assert_eq!(mad(&x).unwrap(), mad_oracle(&x));
        }

        #[test]
        fn mad_translation_invariant(
            x in prop::collection::vec(-100f64..100.0, 1..100),
            c in -100f64..100.0,
        ) {
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let (a, b) = (mad(&x).unwrap(), mad(&shifted).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn mad_homogeneous(
            x in prop::collection::vec(-100f64..100.0, 1..100),
            c in -10f64..10.0,
        ) {
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            let (a, b) = (mad(&x).unwrap(), mad(&scaled).unwrap());
            prop_assert!((b - c.abs() * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }

        #[test]
        fn distance_metric_axioms(
            scales in prop::collection::vec(0.1f64..10.0, 3),
            a in prop::collection::vec(-50f64..50.0, 3),
            b in prop::collection::vec(-50f64..50.0, 3),
            c in prop::collection::vec(-50f64..50.0, 3),
        ) {
            let s = ScalingVector::from_scales(scales).unwrap();
            let ab = distance(&a, &b, &s).unwrap();
            prop_assert_eq!(ab, distance(&b, &a, &s).unwrap());
            let ac = distance(&a, &c, &s).unwrap();
            let cb = distance(&c, &b, &s).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
        }

        #[test]
        fn unit_change_cancels(
            col in prop::collection::vec(-50f64..50.0, 5..40),
            a in -50f64..50.0,
            b in -50f64..50.0,
            factor in 0.01f64..100.0,
        ) {
            let t = one_col(&col);
            prop_assume!(mad(&col).unwrap() > 1e-6);
            let mut t2 = t.clone();
            t2.scale_stat_column(0, factor);
            let d1 = distance(&[a], &[b], &fit_scaling(&t).unwrap()).unwrap();
            let d2 = distance(&[a * factor], &[b * factor], &fit_scaling(&t2).unwrap()).unwrap();
            prop_assert!((d1 - d2).abs() <= 1e-9 * (1.0 + d1));
        }
    }
}
