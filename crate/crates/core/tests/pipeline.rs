use abcgof::gof::gfit_post;
use abcgof::pca::{envelope, pca_fit};
use abcgof::ppc::ppc_report;
use abcgof::sim::{prior_predictive, simulate_table, Family, ModelSpec};
use abcgof::*;

fn toy_table(n: usize, seed: u64) -> ReferenceTable {
    let sim = ModelSpec::toy(Family::Gaussian, 50).build().unwrap();
    simulate_table(sim.as_ref(), n, Seed(seed)).unwrap()
}

#[test]
fn files_round_trip_into_gfit() {
    let dir = tempfile::tempdir().unwrap();
    let table = toy_table(3000, 1);
    table.save(dir.path().join("t.tsv")).unwrap();
    let obs = ObservedStats::new(table.stat_names().to_vec(), table.stat_row(17).to_vec()).unwrap();
    obs.save(dir.path().join("o.tsv")).unwrap();
    let t2 = load_reference_table(dir.path().join("t.tsv")).unwrap();
    assert_eq!(t2, table);
    let o2 = load_observed(dir.path().join("o.tsv"), &t2).unwrap();
    assert_eq!(o2, obs);
    let a = gfit(&table, &obs, 0.01, 500, Seed(4)).unwrap();
    let b = gfit(&t2, &o2, 0.01, 500, Seed(4)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn far_observation_has_zero_p_value() {
    let table = toy_table(5000, 2);
    let scaling = fit_scaling(&table).unwrap();
    let far: Vec<f64> = (0..table.n_stats())
        .map(|j| {
            let col = table.stat_column(j);
            col.iter().cloned().fold(f64::MIN, f64::max) + 50.0 * scaling.scales()[j]
        })
        .collect();
    let obs = ObservedStats::new(table.stat_names().to_vec(), far).unwrap();
    let r = gfit(&table, &obs, 0.01, 1000, Seed(3)).unwrap();
    assert!(r.observed_d > r.null_values.iter().cloned().fold(0.0, f64::max));
    assert_eq!(r.p_value, 0.0);
    assert!(r.p_value_conservative > 0.0);
}

#[test]
fn posterior_test_and_checks_on_toy_data() {
    let table = toy_table(4000, 5);
    let sim = ModelSpec::toy(Family::Gaussian, 50).build().unwrap();
    let (_, stats) = prior_predictive(sim.as_ref(), &mut Seed(6).rng()).unwrap();
    let obs = ObservedStats::new(table.stat_names().to_vec(), stats).unwrap();
    let fit = gfit_post(&table, &obs, 0.02, sim.as_ref(), 50, 40, Seed(7)).unwrap();
    assert_eq!(fit.replicates.len(), 50);
    assert_eq!(fit.result.null_values.len(), 40);
    assert!((0.0..=1.0).contains(&fit.result.p_value));
    let again = gfit_post(&table, &obs, 0.02, sim.as_ref(), 50, 40, Seed(7)).unwrap();
    assert_eq!(fit.result, again.result);

    let report = ppc_report(&fit.replicates, &obs).unwrap();
    assert_eq!(report.per_stat.len(), 4);

    let scaling = fit_scaling(&table).unwrap();
    let pca = pca_fit(&table, &scaling, &obs).unwrap();
    let env = envelope(&pca.scores, pca.observed_score.unwrap(), 0.99).unwrap();
    assert!(pca.scores.iter().filter(|&&p| env.contains(p)).count() >= 3960);
}

#[test]
fn laplace_data_flagged_by_kurtosis_check() {
    let table = toy_table(4000, 8);
    let gauss = ModelSpec::toy(Family::Gaussian, 50).build().unwrap();
    let laplace = ModelSpec::toy(Family::Laplace, 1000).build().unwrap();
    let (_, stats) = prior_predictive(laplace.as_ref(), &mut Seed(9).rng()).unwrap();
    let obs = ObservedStats::new(table.stat_names().to_vec(), stats).unwrap();
    let fit = gfit_post(&table, &obs, 0.02, gauss.as_ref(), 100, 20, Seed(10)).unwrap();
    let report = ppc_report(&fit.replicates, &obs).unwrap();
    let kurt = report.per_stat.iter().find(|c| c.stat == "kurtosis").unwrap();
    assert!(kurt.upper_tail < 0.05, "{}", kurt.upper_tail);
}
