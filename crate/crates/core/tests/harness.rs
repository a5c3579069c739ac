use abcgof::harness::*;
use abcgof::sim::{Family, ModelSpec};
use abcgof::{Seed, StatisticKind};

fn toy_config(seed: u64) -> PowerStudyConfig {
    let toy = ModelSpec::toy(Family::Gaussian, 50);
    PowerStudyConfig {
        n_sims: 5000,
        m: 1000,
        n_datasets: 200,
        acceptance_rate: 0.02,
        ..PowerStudyConfig::new(toy, toy, StatisticKind::Prior, Seed(seed))
    }
}

#[test]
fn ks_uniformity_holds_across_seeds() {
    let passes = (0..20u64)
        .filter(|&s| run_calibration(&toy_config(1000 + s)).unwrap().ks_uniformity_p > 0.01)
        .count();
    assert!(passes >= 19, "{passes}/20");
}

#[test]
fn power_not_below_type_one_error() {
    let cal = run_calibration(&toy_config(5)).unwrap();
    let mut cfg = toy_config(5);
    cfg.truth_model = ModelSpec::toy(Family::Laplace, 50);
    let pow = run_power(&cfg).unwrap();
    // One-sided: the power study must not reject significantly less often.
    assert!(two_proportion_test(cal.rejections, 200, pow.rejections, 200) > 0.01);
}

#[test]
fn uniform_histogram_counts() {
    let p: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 + 0.0005).collect();
    let counts = pvalue_histogram(&p, 10).unwrap();
    assert!(counts.iter().all(|&c| (70..=130).contains(&c)));
    assert_eq!(counts.iter().sum::<usize>(), 1000);
}

#[test]
fn result_json_and_histogram_tsv() {
    let mut cfg = toy_config(8);
    cfg.n_datasets = 30;
    cfg.m = 100;
    let r = run_calibration(&cfg).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(v["p_values"].as_array().unwrap().len(), 30);
    assert_eq!(v["config"]["M"], 100);
    let tsv = emit_pvalue_histogram(&r, 5).unwrap();
    let total: usize = tsv.lines().skip(1).map(|l| l.split('\t').nth(2).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 30);
}
