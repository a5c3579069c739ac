//! Single-population coalescent with piecewise-constant size and
//! infinite-sites mutation.
//!
//! Time is measured in coalescent units of the present-day population and
//! `theta = 4 N mu` per locus, so mutations fall at rate `theta / 2` per unit
//! of branch length (the `ms` convention). Sequences are never materialized:
//! every statistic is a function of the number of chromosomes carrying each
//! mutation.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sim::Simulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemographyLabel {
    Constant,
    Bottleneck,
    Expansion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epoch {
    /// Start of the epoch, backward in time from the present.
    pub start: f64,
    /// Population size relative to the present-day reference size.
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demography {
    epochs: Vec<Epoch>,
    pub label: DemographyLabel,
}

impl Demography {
    pub fn new(epochs: Vec<Epoch>, label: DemographyLabel) -> Result<Self> {
        let first = epochs
            .first()
            .ok_or_else(|| Error::InvalidArgument("demography needs at least one epoch".into()))?;
        if first.start != 0.0 {
            return Err(Error::InvalidArgument("first epoch must start at time 0".into()));
        }
        if epochs.windows(2).any(|w| !(w[1].start > w[0].start)) {
            return Err(Error::InvalidArgument("epoch start times must increase strictly".into()));
        }
        if epochs.iter().any(|e| !(e.size > 0.0 && e.size.is_finite() && e.start.is_finite())) {
            return Err(Error::InvalidArgument("epoch sizes must be positive and finite".into()));
        }
        Ok(Self { epochs, label })
    }

    pub fn constant() -> Self {
        Self::constant_size(1.0).expect("unit size is valid")
    }

    pub fn constant_size(size: f64) -> Result<Self> {
        Self::new(vec![Epoch { start: 0.0, size }], DemographyLabel::Constant)
    }

    /// Size `size` between `start` and `start + duration`, 1 elsewhere.
    pub fn bottleneck(size: f64, start: f64, duration: f64) -> Result<Self> {
        if !(size < 1.0) {
            return Err(Error::InvalidArgument(format!("bottleneck size must be below 1, got {size}")));
        }
        Self::new(
            vec![
                Epoch { start: 0.0, size: 1.0 },
                Epoch { start, size },
                Epoch { start: start + duration, size: 1.0 },
            ],
            DemographyLabel::Bottleneck,
        )
    }

    /// Present size 1, ancestral size `ancestral_size` before `time`.
    pub fn expansion(ancestral_size: f64, time: f64) -> Result<Self> {
        if !(ancestral_size < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ancestral size must be below the present size, got {ancestral_size}"
            )));
        }
        Self::new(
            vec![
                Epoch { start: 0.0, size: 1.0 },
                Epoch { start: time, size: ancestral_size },
            ],
            DemographyLabel::Expansion,
        )
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    time: f64,
    parent: Option<usize>,
    children: Option<[usize; 2]>,
    leaves: u32,
}

/// Binary genealogy: leaves are nodes `0..n`, the root is the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct Genealogy {
    nodes: Vec<Node>,
    n_leaves: usize,
}

impl Genealogy {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn height(&self) -> f64 {
        self.nodes[self.root()].time
    }

    pub fn time(&self, node: usize) -> f64 {
        self.nodes[node].time
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.nodes[node].parent
    }

    /// Length of the branch above `node` (0 for the root).
    pub fn branch_length(&self, node: usize) -> f64 {
        match self.nodes[node].parent {
            Some(p) => self.nodes[p].time - self.nodes[node].time,
            None => 0.0,
        }
    }

    pub fn total_length(&self) -> f64 {
        (0..self.nodes.len()).map(|i| self.branch_length(i)).sum()
    }

    /// Number of sampled chromosomes below `node`.
    pub fn leaf_count(&self, node: usize) -> usize {
        self.nodes[node].leaves as usize
    }

    /// Sampled chromosomes below `node`, in increasing order.
    pub fn leaves_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            match self.nodes[v].children {
                Some([a, b]) => {
                    stack.push(a);
                    stack.push(b);
                }
                None => out.push(v),
            }
        }
        out.sort_unstable();
        out
    }
}

/// Standard coalescent under `demography`. With `j` lineages the pairwise
/// coalescence hazard is `j (j - 1) / 2` divided by the epoch's relative size;
/// an exponential draw of unit rate is spent across epochs until exhausted.
pub fn simulate_genealogy(demography: &Demography, n: usize, rng: &mut SimRng) -> Genealogy {
    assert!(n >= 2, "a genealogy needs at least two chromosomes");
    let epochs = demography.epochs();
    let mut nodes: Vec<Node> = (0..n)
        .map(|_| Node {
            time: 0.0,
            parent: None,
            children: None,
            leaves: 1,
        })
        .collect();
    nodes.reserve(n - 1);
    let mut active: Vec<usize> = (0..n).collect();
    let mut t = 0.0;
    let mut epoch = 0;
    while active.len() > 1 {
        let j = active.len() as f64;
        let rate = j * (j - 1.0) / 2.0;
        let mut hazard: f64 = Exp1.sample(rng);
        loop {
            let size = epochs[epoch].size;
            let end = epochs.get(epoch + 1).map_or(f64::INFINITY, |e| e.start);
            let dt = hazard * size / rate;
            if t + dt < end {
                t += dt;
                break;
            }
            hazard -= (end - t) * rate / size;
            t = end;
            epoch += 1;
        }
        let len = active.len();
        let a = rng.random_range(0..len);
        let mut b = rng.random_range(0..len - 1);
        if b >= a {
            b += 1;
        }
        let (ca, cb) = (active[a], active[b]);
        let id = nodes.len();
        nodes.push(Node {
            time: t,
            parent: None,
            children: Some([ca, cb]),
            leaves: nodes[ca].leaves + nodes[cb].leaves,
        });
        nodes[ca].parent = Some(id);
        nodes[cb].parent = Some(id);
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        active.swap_remove(hi);
        active[lo] = id;
    }
    Genealogy { nodes, n_leaves: n }
}

/// Mutations that landed on the branch above `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchMutations {
    pub node: usize,
    pub count: u64,
}

/// Poisson(theta / 2 * length) mutations on every branch. Only branches that
/// received at least one mutation are returned.
pub fn drop_mutations(tree: &Genealogy, theta: f64, rng: &mut SimRng) -> Vec<BranchMutations> {
    let mut out = Vec::new();
    if !(theta > 0.0) {
        return out;
    }
    for node in 0..tree.n_nodes() {
        let lambda = theta / 2.0 * tree.branch_length(node);
        if lambda <= 0.0 {
            continue;
        }
        let count = Poisson::new(lambda)
            .expect("positive finite Poisson mean")
            .sample(rng) as u64;
        if count > 0 {
            out.push(BranchMutations { node, count });
        }
    }
    out
}

/// Unfolded site-frequency spectrum: `counts[i - 1]` mutations carried by
/// exactly `i` chromosomes, `i = 1..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SfsVector {
    pub counts: Vec<u64>,
    pub total_snps: u64,
}

impl SfsVector {
    pub fn zeros(n_chromosomes: usize) -> Self {
        Self {
            counts: vec![0; n_chromosomes - 1],
            total_snps: 0,
        }
    }

    pub fn n_chromosomes(&self) -> usize {
        self.counts.len() + 1
    }

    /// Builds the spectrum from per-mutation carrier counts.
    pub fn from_carrier_counts(n_chromosomes: usize, carriers: &[usize]) -> Result<Self> {
        let mut sfs = Self::zeros(n_chromosomes);
        for &c in carriers {
            if c == 0 || c >= n_chromosomes {
                return Err(Error::InvalidArgument(format!(
                    "a segregating mutation is carried by 1..{} chromosomes, got {c}",
                    n_chromosomes - 1
                )));
            }
            sfs.add(c, 1);
        }
        Ok(sfs)
    }

    pub fn from_mutations(tree: &Genealogy, mutations: &[BranchMutations]) -> Self {
        let mut sfs = Self::zeros(tree.n_leaves());
        for m in mutations {
            sfs.add(tree.leaf_count(m.node), m.count);
        }
        sfs
    }

    fn add(&mut self, carriers: usize, count: u64) {
        self.counts[carriers - 1] += count;
        self.total_snps += count;
    }

    /// Mean number of pairwise differences: `sum_i xi_i i (n - i) / C(n, 2)`.
    pub fn pi(&self) -> f64 {
        let n = self.n_chromosomes() as f64;
        let pairs = n * (n - 1.0) / 2.0;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let i = (i + 1) as f64;
                c as f64 * i * (n - i)
            })
            .sum::<f64>()
            / pairs
    }
}

/// Tajima's D from the mean pairwise difference `pi`, the number of
/// segregating sites `s` and the sample size `n >= 4`. Zero when `s = 0`.
pub fn tajima_d(pi: f64, s: u64, n: usize) -> f64 {
    if s == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let a1: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    let a2: f64 = (1..n).map(|i| 1.0 / (i as f64 * i as f64)).sum();
    let b1 = (nf + 1.0) / (3.0 * (nf - 1.0));
    let b2 = 2.0 * (nf * nf + nf + 3.0) / (9.0 * nf * (nf - 1.0));
    let c1 = b1 - 1.0 / a1;
    let c2 = b2 - (nf + 2.0) / (a1 * nf) + a2 / (a1 * a1);
    let e1 = c1 / a1;
    let e2 = c2 / (a1 * a1 + a2);
    let s = s as f64;
    (pi - s / a1) / (e1 * s + e2 * s * (s - 1.0)).sqrt()
}

/// Mean nucleotide diversity over loci, and the mean and variance (n - 1
/// denominator) of per-locus Tajima's D.
pub fn stats_pi_tajima(loci: &[SfsVector]) -> Result<[f64; 3]> {
    if loci.len() < 2 {
        return Err(Error::InvalidArgument("at least two loci are needed".into()));
    }
    let m = loci.len() as f64;
    let mut pi_sum = 0.0;
    let ds: Vec<f64> = loci
        .iter()
        .map(|l| {
            let pi = l.pi();
            pi_sum += pi;
            tajima_d(pi, l.total_snps, l.n_chromosomes())
        })
        .collect();
    let mean_d = ds.iter().sum::<f64>() / m;
    let var_d = ds.iter().map(|d| (d - mean_d).powi(2)).sum::<f64>() / (m - 1.0);
    Ok([pi_sum / m, mean_d, var_d])
}

/// Total SNP count followed by the pooled unfolded SFS entries `1..n-1`.
pub fn stats_sfs(loci: &[SfsVector]) -> Result<Vec<f64>> {
    let first = loci
        .first()
        .ok_or_else(|| Error::InvalidArgument("no loci".into()))?;
    let mut pooled = SfsVector::zeros(first.n_chromosomes());
    for l in loci {
        if l.n_chromosomes() != pooled.n_chromosomes() {
            return Err(Error::InvalidArgument("loci differ in sample size".into()));
        }
        for (i, &c) in l.counts.iter().enumerate() {
            pooled.add(i + 1, c);
        }
    }
    Ok(std::iter::once(pooled.total_snps as f64)
        .chain(pooled.counts.iter().map(|&c| c as f64))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatSet {
    /// Mean nucleotide diversity, mean and variance of Tajima's D (50 loci).
    PiTajima,
    /// Total SNPs plus the unfolded SFS (100 loci).
    Sfs,
}

impl std::str::FromStr for StatSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pi-tajima" => Ok(StatSet::PiTajima),
            "sfs" => Ok(StatSet::Sfs),
            other => Err(Error::InvalidArgument(format!("unknown statistic set '{other}'"))),
        }
    }
}

impl StatSet {
    pub fn as_str(self) -> &'static str {
        match self {
            StatSet::PiTajima => "pi-tajima",
            StatSet::Sfs => "sfs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusConfig {
    pub n_chromosomes: usize,
    pub n_loci: usize,
    /// Base pairs per locus. Only informative: infinite sites means the
    /// length enters through `theta` alone.
    pub locus_length: usize,
}

impl LocusConfig {
    /// 10 diploid individuals, 50 loci of 2 kb.
    pub const PI_TAJIMA: LocusConfig = LocusConfig {
        n_chromosomes: 20,
        n_loci: 50,
        locus_length: 2000,
    };
    /// 10 diploid individuals, 100 loci of 2 kb.
    pub const SFS: LocusConfig = LocusConfig {
        n_chromosomes: 20,
        n_loci: 100,
        locus_length: 2000,
    };

    pub fn for_stats(stats: StatSet) -> Self {
        match stats {
            StatSet::PiTajima => Self::PI_TAJIMA,
            StatSet::Sfs => Self::SFS,
        }
    }
}

/// Prior bounds used by [`coalescent_draw_prior`].
pub mod priors {
    pub const THETA: (f64, f64) = (1.0, 20.0);
    pub const REDUCED_SIZE: (f64, f64) = (0.02, 0.5);
    pub const EVENT_TIME: (f64, f64) = (0.01, 0.5);
    pub const BOTTLENECK_DURATION: (f64, f64) = (0.01, 0.5);
}

/// Draws `(demography, theta)` from the model's prior together with the flat
/// parameter vector logged in reference tables.
pub fn coalescent_draw_prior(label: DemographyLabel, rng: &mut SimRng) -> (Demography, f64, Vec<f64>) {
    let theta = rng.random_range(priors::THETA.0..priors::THETA.1);
    match label {
        DemographyLabel::Constant => (Demography::constant(), theta, vec![theta]),
        DemographyLabel::Bottleneck => {
            let size = rng.random_range(priors::REDUCED_SIZE.0..priors::REDUCED_SIZE.1);
            let start = rng.random_range(priors::EVENT_TIME.0..priors::EVENT_TIME.1);
            let duration = rng.random_range(priors::BOTTLENECK_DURATION.0..priors::BOTTLENECK_DURATION.1);
            let demo = Demography::bottleneck(size, start, duration).expect("prior support is valid");
            (demo, theta, vec![theta, size, start, duration])
        }
        DemographyLabel::Expansion => {
            let size = rng.random_range(priors::REDUCED_SIZE.0..priors::REDUCED_SIZE.1);
            let time = rng.random_range(priors::EVENT_TIME.0..priors::EVENT_TIME.1);
            let demo = Demography::expansion(size, time).expect("prior support is valid");
            (demo, theta, vec![theta, size, time])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalescentModel {
    pub label: DemographyLabel,
    pub stats: StatSet,
    pub config: LocusConfig,
}

impl CoalescentModel {
    pub fn new(label: DemographyLabel, stats: StatSet) -> Self {
        Self {
            label,
            stats,
            config: LocusConfig::for_stats(stats),
        }
    }

    fn demography(&self, theta: &[f64]) -> Result<(Demography, f64)> {
        let expected = self.param_names().len();
        if theta.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{:?} model expects {expected} parameters, got {}",
                self.label,
                theta.len()
            )));
        }
        let demo = match self.label {
            DemographyLabel::Constant => Demography::constant(),
            DemographyLabel::Bottleneck => Demography::bottleneck(theta[1], theta[2], theta[3])?,
            DemographyLabel::Expansion => Demography::expansion(theta[1], theta[2])?,
        };
        if !(theta[0] > 0.0 && theta[0].is_finite()) {
            return Err(Error::InvalidArgument(format!("theta must be positive, got {}", theta[0])));
        }
        Ok((demo, theta[0]))
    }

    /// Per-locus spectra for one dataset.
    pub fn simulate_loci(&self, demography: &Demography, theta: f64, rng: &mut SimRng) -> Vec<SfsVector> {
        (0..self.config.n_loci)
            .map(|_| {
                let tree = simulate_genealogy(demography, self.config.n_chromosomes, rng);
                let muts = drop_mutations(&tree, theta, rng);
                SfsVector::from_mutations(&tree, &muts)
            })
            .collect()
    }
}

impl Simulator for CoalescentModel {
    fn param_names(&self) -> Vec<String> {
        let names: &[&str] = match self.label {
            DemographyLabel::Constant => &["theta"],
            DemographyLabel::Bottleneck => &["theta", "bottleneck_size", "bottleneck_start", "bottleneck_duration"],
            DemographyLabel::Expansion => &["theta", "ancestral_size", "expansion_time"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    fn stat_names(&self) -> Vec<String> {
        match self.stats {
            StatSet::PiTajima => vec!["pi".into(), "tajima_d_mean".into(), "tajima_d_var".into()],
            StatSet::Sfs => std::iter::once("snps".to_string())
                .chain((1..self.config.n_chromosomes).map(|i| format!("sfs_{i}")))
                .collect(),
        }
    }

    fn draw_prior(&self, rng: &mut SimRng) -> Vec<f64> {
        coalescent_draw_prior(self.label, rng).2
    }

    fn in_support(&self, theta: &[f64]) -> bool {
        self.demography(theta).is_ok()
    }

    fn simulate(&self, theta: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        let (demo, mutation_rate) = self.demography(theta)?;
        let loci = self.simulate_loci(&demo, mutation_rate, rng);
        match self.stats {
            StatSet::PiTajima => Ok(stats_pi_tajima(&loci)?.to_vec()),
            StatSet::Sfs => stats_sfs(&loci),
        }
    }
}
