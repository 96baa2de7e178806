use lgm::data::DataTable;
use lgm::engine::{fit, LatentModel};
use lgm::oracle::{
    conjugate_gaussian, metropolis_lgm, metropolis_model, Chains, MetropolisOptions,
};
use lgm::spec::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};

fn table(cols: &[(&str, Vec<f64>)]) -> DataTable {
    DataTable::from_columns(
        cols.iter()
            .map(|(n, v)| (n.to_string(), v.clone()))
            .collect(),
    )
    .unwrap()
}

fn covariate(n: usize, seed: u64) -> (ChaCha8Rng, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (rng, x)
}

/// Engine means within 0.1 sd and sds within 10% of the chains, for the
/// fixed effects.
fn assert_agrees(spec: &ModelSpec, data: &DataTable, chains: &Chains) {
    let r = fit(spec, data).unwrap();
    for (j, row) in r.summary_fixed.iter().enumerate() {
        let (m, s) = (chains.mean[j], chains.sd[j]);
        assert!(
            (row.mean - m).abs() < 0.1 * s,
            "{}: engine {} chain {m} ± {}",
            row.name,
            row.mean,
            chains.mcse[j]
        );
        assert!(
            (row.sd / s - 1.0).abs() < 0.1,
            "{}: engine sd {} chain sd {s}",
            row.name,
            row.sd
        );
    }
}

#[test]
fn chains_match_the_conjugate_posterior() {
    let (mut rng, x) = covariate(50, 21);
    let y: Vec<f64> = x
        .iter()
        .map(|xi| 1.0 - 0.7 * xi + 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let spec = ModelSpec::parse(
        r#"{"response":"y","fixed":["1","x"],
            "control":{"family":{"hyper":{"prec":{"initial":1.3862943611198906,"fixed":true}}}}}"#,
    )
    .unwrap();
    let data = table(&[("y", y.clone()), ("x", x.clone())]);
    let c = metropolis_lgm(&spec, &data, 40_000, 1).unwrap();
    let exact = conjugate_gaussian(&[vec![1.0; 50], x], &y, &[0.001, 0.001], 4.0).unwrap();
    assert_eq!(c.names.len(), 2);
    for j in 0..2 {
        assert!(
            (c.mean[j] - exact.mean[j]).abs() < 3.0 * c.mcse[j],
            "{j}: {} vs {} (mcse {})",
            c.mean[j],
            exact.mean[j],
            c.mcse[j]
        );
        assert!((c.sd[j] / exact.sd()[j] - 1.0).abs() < 0.05);
        assert!(
            c.acceptance[j] > 0.3 && c.acceptance[j] < 0.6,
            "{}",
            c.acceptance[j]
        );
    }
}

#[test]
fn chains_are_reproducible_from_the_seed() {
    let (mut rng, x) = covariate(20, 4);
    let y: Vec<f64> = x
        .iter()
        .map(|xi| xi + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let spec = ModelSpec::parse(r#"{"response":"y","fixed":["1","x"]}"#).unwrap();
    let data = table(&[("y", y), ("x", x)]);
    let a = metropolis_lgm(&spec, &data, 2_000, 9).unwrap();
    let b = metropolis_lgm(&spec, &data, 2_000, 9).unwrap();
    assert_eq!(a.draws, b.draws);
    assert_eq!(a.mean, b.mean);
    let c = metropolis_lgm(&spec, &data, 2_000, 10).unwrap();
    assert_ne!(a.draws, c.draws);
}

#[test]
fn constrained_models_are_rejected() {
    let t: Vec<f64> = (1..=10).map(f64::from).collect();
    let spec = ModelSpec::parse(
        r#"{"response":"y","fixed":["1"],"random":[{"id":"t","model":"rw1","constr":true}]}"#,
    )
    .unwrap();
    let model = LatentModel::new(&spec, &table(&[("y", t.clone()), ("t", t)])).unwrap();
    assert!(metropolis_model(&model, &MetropolisOptions::new(100, 1)).is_err());
}

#[test]
fn gaussian_with_unknown_noise_agrees_with_the_engine() {
    let (mut rng, x) = covariate(30, 5);
    let y: Vec<f64> = x
        .iter()
        .map(|xi| 0.5 + 2.0 * xi + 0.8 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let spec = ModelSpec::parse(r#"{"response":"y","fixed":["1","x"]}"#).unwrap();
    let data = table(&[("y", y), ("x", x)]);
    let c = metropolis_lgm(&spec, &data, 100_000, 2).unwrap();
    assert_agrees(&spec, &data, &c);
}

#[test]
fn poisson_regression_agrees_with_the_engine() {
    let (mut rng, x) = covariate(40, 6);
    let y: Vec<f64> = x
        .iter()
        .map(|xi| {
            Poisson::new((1.0 + 0.4 * xi).exp())
                .unwrap()
                .sample(&mut rng)
        })
        .collect();
    let spec =
        ModelSpec::parse(r#"{"response":"y","fixed":["1","x"],"family":"poisson"}"#).unwrap();
    let data = table(&[("y", y), ("x", x)]);
    let c = metropolis_lgm(&spec, &data, 100_000, 3).unwrap();
    assert_agrees(&spec, &data, &c);
}

#[test]
fn binomial_regression_agrees_with_the_engine() {
    let (mut rng, x) = covariate(40, 7);
    let y: Vec<f64> = x
        .iter()
        .map(|xi| {
            let p = 1.0 / (1.0 + (-(0.3 - 0.8 * xi)).exp());
            Binomial::new(10, p).unwrap().sample(&mut rng) as f64
        })
        .collect();
    let spec =
        ModelSpec::parse(r#"{"response":"y","fixed":["1","x"],"family":"binomial","Ntrials":"n"}"#)
            .unwrap();
    let data = table(&[("y", y), ("x", x), ("n", vec![10.0; 40])]);
    let c = metropolis_lgm(&spec, &data, 100_000, 4).unwrap();
    assert_agrees(&spec, &data, &c);
}

#[test]
fn poisson_random_intercept_agrees_with_the_engine() {
    let groups = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let u: Vec<f64> = (0..groups)
        .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let (mut y, mut g) = (vec![], vec![]);
    for (k, uk) in u.iter().enumerate() {
        for _ in 0..10 {
            y.push(Poisson::new((1.5 + uk).exp()).unwrap().sample(&mut rng));
            g.push((k + 1) as f64);
        }
    }
    let spec = ModelSpec::parse(
        r#"{"response":"y","fixed":["1"],"family":"poisson",
            "random":[{"id":"g","model":"iid","hyper":{"prec":{"prior":"pc.prec","param":[1,0.01]}}}]}"#,
    )
    .unwrap();
    let data = table(&[("y", y), ("g", g)]);
    let c = metropolis_lgm(&spec, &data, 200_000, 5).unwrap();
    let r = fit(&spec, &data).unwrap();
    for (j, row) in r.summary_random[0].rows.iter().enumerate() {
        let (m, s) = (c.mean[1 + j], c.sd[1 + j]);
        assert!(
            (row.mean - m).abs() < 0.1 * s,
            "u{j}: engine {} chain {m}",
            row.mean
        );
        assert!(
            (row.sd / s - 1.0).abs() < 0.1,
            "u{j}: engine sd {} chain sd {s}",
            row.sd
        );
    }
}
