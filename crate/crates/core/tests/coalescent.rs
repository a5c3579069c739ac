use abcgof::sim::coalescent::*;
use abcgof::sim::Simulator;
use abcgof::Seed;

fn a_n(n: usize) -> f64 {
    (1..n).map(|i| 1.0 / i as f64).sum()
}

#[test]
fn total_length_matches_expectation() {
    let demo = Demography::constant();
    let mut rng = Seed(21).rng();
    let reps = 50_000;
    let mean = (0..reps).map(|_| simulate_genealogy(&demo, 20, &mut rng).total_length()).sum::<f64>() / reps as f64;
    let expected = 2.0 * a_n(20);
    assert!((mean / expected - 1.0).abs() < 0.005, "{mean} vs {expected}");
}

#[test]
fn segregating_sites_match_watterson() {
    let demo = Demography::constant();
    let mut rng = Seed(22).rng();
    let (reps, theta) = (50_000, 5.0);
    let mut s = 0u64;
    for _ in 0..reps {
        let tree = simulate_genealogy(&demo, 20, &mut rng);
        s += drop_mutations(&tree, theta, &mut rng).iter().map(|m| m.count).sum::<u64>();
    }
    let mean = s as f64 / reps as f64;
    assert!((mean / (theta * a_n(20)) - 1.0).abs() < 0.01, "{mean}");
}

#[test]
fn snp_count_and_spectrum_agree() {
    let model = CoalescentModel::new(DemographyLabel::Constant, StatSet::Sfs);
    let stats = model.simulate(&[10.0], &mut Seed(23).rng()).unwrap();
    assert_eq!(stats.len(), 20);
    assert_eq!(stats[0], stats[1..].iter().sum::<f64>());
}

#[test]
fn mutation_carriers_are_the_leaves_below() {
    let mut rng = Seed(24).rng();
    let tree = simulate_genealogy(&Demography::constant(), 12, &mut rng);
    for node in 0..tree.n_nodes() {
        assert_eq!(tree.leaves_under(node).len(), tree.leaf_count(node));
    }
    assert_eq!(tree.leaf_count(tree.root()), 12);
    let muts = drop_mutations(&tree, 50.0, &mut rng);
    let sfs = SfsVector::from_mutations(&tree, &muts);
    assert_eq!(sfs.total_snps, muts.iter().map(|m| m.count).sum::<u64>());
    assert_eq!(sfs.counts.iter().sum::<u64>(), sfs.total_snps);
}

#[test]
fn expansion_lowers_tajima_d() {
    let m = CoalescentModel::new(DemographyLabel::Expansion, StatSet::PiTajima);
    let strong = m.simulate(&[10.0, 0.02, 0.05], &mut Seed(25).rng()).unwrap();
    assert!(strong[1] < -0.5, "{strong:?}");
}
