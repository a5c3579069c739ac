// Independent brute-force versions of the library's core quantities, shared
// by the property tests and the acceptance suite.

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn mad_oracle(v: &[f64]) -> f64 {
    let m = median(v.to_vec());
    1.4826 * median(v.iter().map(|x| (x - m).abs()).collect())
}

/// Indices and distances of the `count` nearest rows, ties by row index.
pub fn nearest_oracle(stats: &[Vec<f64>], obs: &[f64], count: usize) -> (Vec<usize>, Vec<f64>) {
    let k = obs.len();
    let scales: Vec<f64> = (0..k)
        .map(|j| mad_oracle(&stats.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let mut d: Vec<(f64, usize)> = stats
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut s = 0.0;
            for j in 0..k {
                // Multiplying by the reciprocal rounds like the library, so
                // float-level near ties break the same way.
                if scales[j] > 0.0 {
                    let z = (r[j] - obs[j]) * (1.0 / scales[j]);
                    s += z * z;
                }
            }
            (s.sqrt(), i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d.truncate(count);
    (d.iter().map(|x| x.1).collect(), d.iter().map(|x| x.0).collect())
}

/// pi from explicit pairwise differences, S from segregating columns and D
/// from the textbook constants.
pub fn haplotype_oracle(haps: &[Vec<bool>]) -> (f64, usize, f64) {
    let n = haps.len();
    let mut diffs = 0usize;
    for a in 0..n {
        for b in a + 1..n {
            diffs += haps[a].iter().zip(&haps[b]).filter(|(x, y)| x != y).count();
        }
    }
    let pi = diffs as f64 / (n * (n - 1) / 2) as f64;
    let s = (0..haps[0].len()).filter(|&j| haps.iter().any(|h| h[j]) && haps.iter().any(|h| !h[j])).count();
    if s == 0 {
        return (pi, 0, 0.0);
    }
    let nf = n as f64;
    let a1: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    let a2: f64 = (1..n).map(|i| 1.0 / (i * i) as f64).sum();
    let b1 = (nf + 1.0) / (3.0 * (nf - 1.0));
    let b2 = 2.0 * (nf * nf + nf + 3.0) / (9.0 * nf * (nf - 1.0));
    let c1 = b1 - 1.0 / a1;
    let c2 = b2 - (nf + 2.0) / (a1 * nf) + a2 / (a1 * a1);
    let e1 = c1 / a1;
    let e2 = c2 / (a1 * a1 + a2);
    let sf = s as f64;
    (pi, s, (pi - sf / a1) / (e1 * sf + e2 * sf * (sf - 1.0)).sqrt())
}


pub fn p_value_oracle(d: f64, nulls: &[f64]) -> f64 {
    let mut count = 0;
    for &v in nulls {
        if v >= d {
            count += 1;
        }
    }
    count as f64 / nulls.len() as f64
}

/// Carrier counts of the segregating columns of a haplotype matrix.
pub fn carriers(haps: &[Vec<bool>]) -> Vec<usize> {
    let n = haps.len();
    (0..haps[0].len())
        .map(|site| haps.iter().filter(|h| h[site]).count())
        .filter(|&c| c > 0 && c < n)
        .collect()
}
