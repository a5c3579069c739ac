//! Principal-component view of the prior predictive statistics with a
//! trimmed convex-hull envelope around the simulations.

use std::fmt::Write as _;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling::ScalingVector;
use crate::table::{ObservedStats, ReferenceTable};

/// Relative tolerance under which two eigenvalues count as tied.
const EIGEN_TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Statistic indices entering the projection (non-dropped ones).
    pub columns: Vec<usize>,
    scales: Vec<f64>,
    /// Column means of the standardized statistics.
    pub mean: Vec<f64>,
    /// One `[pc1, pc2]` loading pair per entry of `columns`.
    pub loadings: Vec<[f64; 2]>,
    pub scores: Vec<[f64; 2]>,
    pub observed_score: Option<[f64; 2]>,
    pub explained_fraction: [f64; 2],
    /// Every eigenvalue of the covariance, largest first.
    pub eigenvalues: Vec<f64>,
}

impl PcaProjection {
    /// Score of a full statistic vector.
    pub fn project(&self, stats: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, (&j, load)) in self.columns.iter().zip(&self.loadings).enumerate() {
            let z = stats[j] / self.scales[c] - self.mean[c];
            out[0] += z * load[0];
            out[1] += z * load[1];
        }
        out
    }

    /// Maps a score back to standardized statistic space (used columns).
    pub fn back_project(&self, score: [f64; 2]) -> Vec<f64> {
        self.loadings
            .iter()
            .zip(&self.mean)
            .map(|(l, m)| m + score[0] * l[0] + score[1] * l[1])
            .collect()
    }

    pub fn standardized(&self, stats: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .zip(&self.scales)
            .map(|(&j, s)| stats[j] / s)
            .collect()
    }

    /// `pc1, pc2, kind` rows for the simulations and, if set, the observed
    /// point.
    pub fn scores_tsv(&self) -> String {
        let mut out = String::from("pc1\tpc2\tkind\n");
        for s in &self.scores {
            writeln!(out, "{}\t{}\tsim", s[0], s[1]).expect("writing to a String cannot fail");
        }
        if let Some(o) = self.observed_score {
            writeln!(out, "{}\t{}\tobserved", o[0], o[1]).expect("writing to a String cannot fail");
        }
        out
    }
}

/// Fits the first two principal components of the scaled statistics and
/// projects the observed vector.
pub fn pca_fit(
    table: &ReferenceTable,
    scaling: &ScalingVector,
    observed: &ObservedStats,
) -> Result<PcaProjection> {
    observed.ensure_matches(table)?;
    let mut pca = pca_fit_table(table, scaling)?;
    pca.observed_score = Some(pca.project(observed.values()));
    Ok(pca)
}

pub fn pca_fit_table(table: &ReferenceTable, scaling: &ScalingVector) -> Result<PcaProjection> {
    let n = table.n_rows();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 3 simulations, got {n}")));
    }
    if scaling.len() != table.n_stats() {
        return Err(Error::LengthMismatch {
            expected: table.n_stats(),
            actual: scaling.len(),
        });
    }
    let columns: Vec<usize> = scaling.active().collect();
    let k = columns.len();
    if k < 2 {
        return Err(Error::TooFewStatistics(k));
    }
    let scales: Vec<f64> = columns.iter().map(|&j| scaling.scales()[j]).collect();

    let z = DMatrix::from_fn(n, k, |i, c| table.stat_row(i)[columns[c]] / scales[c]);
    let mean: Vec<f64> = (0..k).map(|c| z.column(c).mean()).collect();
    let mut centered = z;
    for c in 0..k {
        centered.column_mut(c).add_scalar_mut(-mean[c]);
    }
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..k).collect();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lead = |e: usize| {
        let v = eig.eigenvectors.column(e);
        (0..k)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .unwrap_or(0)
    };
    order.sort_by(|&a, &b| {
        let (la, lb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        if (la - lb).abs() <= EIGEN_TIE_TOL * top {
            lead(a).cmp(&lead(b))
        } else {
            lb.total_cmp(&la)
        }
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&e| eig.eigenvalues[e].max(0.0)).collect();
    let trace: f64 = eigenvalues.iter().sum();
    if !(trace > 0.0) {
        return Err(Error::InvalidArgument("statistics have zero variance".into()));
    }

    let mut loadings = vec![[0.0; 2]; k];
    for (pc, &e) in order.iter().take(2).enumerate() {
        let v = eig.eigenvectors.column(e);
        let lead = lead(e);
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..k {
            loadings[c][pc] = sign * v[c];
        }
    }

    let scores = (0..n)
        .map(|i| {
            let row = centered.row(i);
            let mut s = [0.0; 2];
            for c in 0..k {
                s[0] += row[c] * loadings[c][0];
                s[1] += row[c] * loadings[c][1];
            }
            s
        })
        .collect();

    Ok(PcaProjection {
        columns,
        scales,
        mean,
        loadings,
        scores,
        observed_score: None,
        explained_fraction: [eigenvalues[0] / trace, eigenvalues[1] / trace],
        eigenvalues,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub coverage: f64,
    /// Convex hull vertices, counter-clockwise.
    pub polygon: Vec<[f64; 2]>,
    pub contains_observed: bool,
    /// Number of points kept before taking the hull.
    pub kept: usize,
}

impl Envelope {
    /// Point-in-polygon test; the boundary counts as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        polygon_contains(&self.polygon, p)
    }

    pub fn polygon_tsv(&self) -> String {
        let mut out = String::from("pc1\tpc2\n");
        for v in &self.polygon {
            writeln!(out, "{}\t{}", v[0], v[1]).expect("writing to a String cannot fail");
        }
        out
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn norm(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Andrew's monotone chain; collinear points are left out of the hull.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_contains(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    const REL: f64 = 1e-9;
    match poly.len() {
        0 => false,
        1 => norm(poly[0], p) <= REL * (1.0 + p[0].abs() + p[1].abs()),
        2 => {
            let (a, b) = (poly[0], poly[1]);
            let len = norm(a, b);
            let off = cross(a, b, p).abs() <= REL * len * (norm(a, p) + len);
            let along = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
            off && along >= -REL * len * len && along <= (1.0 + REL) * len * len
        }
        m => (0..m).all(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % m]);
            cross(a, b, p) >= -REL * norm(a, b) * (norm(a, p) + norm(a, b))
        }),
    }
}

/// Keeps the `ceil(coverage * n)` scores nearest the centroid in
/// Mahalanobis distance and returns their convex hull.
pub fn envelope(scores: &[[f64; 2]], observed_score: [f64; 2], coverage: f64) -> Result<Envelope> {
    let n = scores.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("envelope needs at least 3 points, got {n}")));
    }
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::InvalidArgument(format!("coverage must lie in (0, 1), got {coverage}")));
    }
    let nf = n as f64;
    let c = [
        scores.iter().map(|s| s[0]).sum::<f64>() / nf,
        scores.iter().map(|s| s[1]).sum::<f64>() / nf,
    ];
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for s in scores {
        let (dx, dy) = (s[0] - c[0], s[1] - c[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (sxx, sxy, syy) = (sxx / (nf - 1.0), sxy / (nf - 1.0), syy / (nf - 1.0));
    let det = sxx * syy - sxy * sxy;
    let trace = sxx + syy;
    let metric: Box<dyn Fn([f64; 2]) -> f64> = if trace > 0.0 && det > 1e-12 * trace * trace {
        Box::new(move |s| {
            let (dx, dy) = (s[0] - c[0], s[1] - c[1]);
            (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det
        })
    } else {
        warn!("degenerate score covariance; ranking envelope points by Euclidean distance");
        Box::new(move |s| (s[0] - c[0]).powi(2) + (s[1] - c[1]).powi(2))
    };

    let keep = ((coverage * nf) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut ranked: Vec<(f64, usize)> = scores.iter().enumerate().map(|(i, &s)| (metric(s), i)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let kept: Vec<[f64; 2]> = ranked.iter().take(keep).map(|&(_, i)| scores[i]).collect();
    let polygon = convex_hull(&kept);
    let contains_observed = polygon_contains(&polygon, observed_score);
    Ok(Envelope {
        coverage,
        polygon,
        contains_observed,
        kept: keep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use crate::scaling::fit_scaling;
    use rand_distr::{Distribution, StandardNormal};

    fn table(rows: &[Vec<f64>]) -> ReferenceTable {
        let k = rows[0].len();
        let names = (0..k).map(|j| format!("s{j}")).collect();
        ReferenceTable::new(vec![], names, vec![], rows.concat()).unwrap()
    }

    fn gaussian_rows(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Seed(seed).rng();
        (0..n)
            .map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn rank_one_data() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| {
            let t = i as f64 * 0.3 - 4.0;
            vec![t, 2.0 * t + 1.0, -t]
        }).collect();
        let t = table(&rows);
        let pca = pca_fit_table(&t, &fit_scaling(&t).unwrap()).unwrap();
        assert!((pca.explained_fraction[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn isotropic_gaussian_splits_evenly() {
        let t = table(&gaussian_rows(100_000, 2, 1));
        let pca = pca_fit_table(&t, &fit_scaling(&t).unwrap()).unwrap();
        for f in pca.explained_fraction {
            assert!((f - 0.5).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn loadings_orthonormal_and_scores_consistent() {
        let mut rows = gaussian_rows(500, 4, 2);
        for r in &mut rows {
            r[1] += 0.8 * r[0];
            r[3] = 3.0 * r[3] - r[2];
        }
        let t = table(&rows);
        let s = fit_scaling(&t).unwrap();
        let pca = pca_fit_table(&t, &s).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let dot: f64 = pca.loadings.iter().map(|l| l[a] * l[b]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8);
            }
            let lead = pca.loadings.iter().map(|l| l[a]).max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap();
            assert!(lead > 0.0);
        }
        for i in [0, 17, 499] {
            let p = pca.project(t.stat_row(i));
            assert!((p[0] - pca.scores[i][0]).abs() < 1e-10);
            assert!((p[1] - pca.scores[i][1]).abs() < 1e-10);
        }
    }

    #[test]
    fn reconstruction_error_matches_discarded_variance() {
        let mut rows = gaussian_rows(2000, 5, 3);
        for r in &mut rows {
            r[1] += r[0];
            r[2] = 0.5 * r[2] + r[1];
        }
        let t = table(&rows);
        let pca = pca_fit_table(&t, &fit_scaling(&t).unwrap()).unwrap();
        let total: f64 = pca.eigenvalues.iter().sum();
        let err: f64 = (0..t.n_rows())
            .map(|i| {
                let z = pca.standardized(t.stat_row(i));
                let back = pca.back_project(pca.scores[i]);
                z.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / (t.n_rows() as f64 - 1.0);
        let expected = (1.0 - pca.explained_fraction[0] - pca.explained_fraction[1]) * total;
        assert!((err - expected).abs() < 1e-6, "{err} vs {expected}");
    }

    #[test]
    fn row_permutation_keeps_loadings() {
        let rows = gaussian_rows(300, 3, 4);
        let mut rev = rows.clone();
        rev.reverse();
        let (a, b) = (table(&rows), table(&rev));
        let pa = pca_fit_table(&a, &fit_scaling(&a).unwrap()).unwrap();
        let pb = pca_fit_table(&b, &fit_scaling(&b).unwrap()).unwrap();
        for (x, y) in pa.loadings.iter().zip(&pb.loadings) {
            assert!((x[0] - y[0]).abs() < 1e-8 && (x[1] - y[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn too_few_statistics() {
        let t = table(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0], vec![4.0, 5.0]]);
        assert!(matches!(
            pca_fit_table(&t, &fit_scaling(&t).unwrap()),
            Err(Error::TooFewStatistics(1))
        ));
    }

    #[test]
    fn square_with_centre() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]];
        let env = envelope(&pts, [10.0, 10.0], 0.8).unwrap();
        assert_eq!(env.kept, 4);
        assert!(!env.contains_observed);
        assert!(envelope(&pts, [0.5, 0.5], 0.8).unwrap().contains_observed);
    }

    #[test]
    fn nearly_full_coverage_is_full_hull() {
        let mut rng = Seed(5).rng();
        let pts: Vec<[f64; 2]> = (0..1000)
            .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
            .collect();
        let env = envelope(&pts, [0.0, 0.0], 0.999).unwrap();
        assert_eq!(env.kept, 999);
        assert!(pts.iter().filter(|&&p| env.contains(p)).count() >= 999);
        let env = envelope(&pts, [0.0, 0.0], 0.9995).unwrap();
        assert_eq!(env.kept, 1000);
        assert_eq!(env.polygon, convex_hull(&pts));
        assert!(pts.iter().all(|&p| env.contains(p)));
    }

    #[test]
    fn coverage_always_met() {
        for seed in 0..20 {
            let mut rng = Seed(seed).rng();
            let pts: Vec<[f64; 2]> = (0..200)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    let y: f64 = StandardNormal.sample(&mut rng);
                    [x * 3.0, 0.5 * x + y * 0.2]
                })
                .collect();
            let env = envelope(&pts, [0.0, 0.0], 0.9).unwrap();
            let inside = pts.iter().filter(|&&p| env.contains(p)).count();
            assert!(inside >= 180, "{inside}");
            assert!(env.contains_observed);
        }
    }

    #[test]
    fn collinear_scores_fall_back() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let env = envelope(&pts, [4.5, 9.0], 0.5).unwrap();
        assert!(env.contains_observed);
        assert!(!env.contains([4.5, 0.0]));
        assert!(envelope(&pts, [0.0, 0.0], 1.0).is_err());
    }
}
