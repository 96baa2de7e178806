use lgm::data::DataTable;
use lgm::engine::{
    find_mode, fit, log_posterior_theta, FitResult, LatentModel, ModeOptions, Settings, SummaryRow,
};
use lgm::spec::ModelSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

fn table(cols: &[(&str, Vec<f64>)]) -> DataTable {
    DataTable::from_columns(
        cols.iter()
            .map(|(n, v)| (n.to_string(), v.clone()))
            .collect(),
    )
    .unwrap()
}

fn gaussian_iid(seed: u64, n: usize) -> (ModelSpec, DataTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = 6;
    let u: Vec<f64> = (0..groups)
        .map(|_| 0.7 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let g: Vec<f64> = (0..n).map(|i| (i % groups + 1) as f64).collect();
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y = (0..n)
        .map(|i| 1.0 + 0.5 * x[i] + u[i % groups] + 0.6 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let spec = ModelSpec::parse(
        r#"{"response":"y","fixed":["1","x"],"random":[{"id":"g","model":"iid"}]}"#,
    )
    .unwrap();
    (spec, table(&[("y", y), ("x", x), ("g", g)]))
}

fn poisson_iid(seed: u64, n: usize) -> (ModelSpec, DataTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = 5;
    let u: Vec<f64> = (0..groups)
        .map(|_| 0.4 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let g: Vec<f64> = (0..n).map(|i| (i % groups + 1) as f64).collect();
    let y = (0..n)
        .map(|i| {
            Poisson::new((1.0 + u[i % groups]).exp())
                .unwrap()
                .sample(&mut rng)
        })
        .collect();
    let spec = ModelSpec::parse(
        r#"{"response":"y","fixed":["1"],"family":"poisson",
            "random":[{"id":"g","model":"iid","hyper":{"prec":{"prior":"pc.prec","param":[1,0.01]}}}]}"#,
    )
    .unwrap();
    (spec, table(&[("y", y), ("g", g)]))
}

fn all_rows(r: &FitResult) -> impl Iterator<Item = &SummaryRow> {
    r.summary_fixed
        .iter()
        .chain(r.summary_random.iter().flat_map(|s| &s.rows))
        .chain(&r.summary_hyperpar)
        .chain(&r.summary_fitted)
}

fn check_invariants(r: &FitResult) -> Result<(), TestCaseError> {
    let total: f64 = r.grid.points.iter().map(|p| p.weight).sum();
    prop_assert!((total - 1.0).abs() < 1e-12, "weights sum to {}", total);
    prop_assert!(r.grid.points.iter().all(|p| p.weight >= 0.0));
    for row in all_rows(r) {
        prop_assert!(row.q025 <= row.q50 && row.q50 <= row.q975, "{:?}", row);
        prop_assert!(row.sd > 0.0 && row.mean.is_finite(), "{:?}", row);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gaussian_fits_have_normalised_weights_and_ordered_quantiles(seed in 0u64..10_000, n in 24usize..80) {
        let (spec, data) = gaussian_iid(seed, n);
        check_invariants(&fit(&spec, &data).unwrap())?;
    }

    #[test]
    fn poisson_fits_have_normalised_weights_and_ordered_quantiles(seed in 0u64..10_000, n in 20usize..80) {
        let (spec, data) = poisson_iid(seed, n);
        check_invariants(&fit(&spec, &data).unwrap())?;
    }

    #[test]
    fn constant_shift_leaves_the_mode_unchanged(seed in 0u64..10_000, shift in -50.0f64..50.0) {
        let (spec, data) = gaussian_iid(seed, 40);
        let model = LatentModel::new(&spec, &data).unwrap();
        let s = Settings::default();
        let start = model.initial_theta();
        let f = |t: &[f64]| log_posterior_theta(&model, t, None, &s);
        let g = |t: &[f64]| log_posterior_theta(&model, t, None, &s).map(|v| v + shift);
        let a = find_mode(&f, &start, &ModeOptions::default()).unwrap();
        let b = find_mode(&g, &start, &ModeOptions::default()).unwrap();
        for (x, y) in a.theta.iter().zip(&b.theta) {
            prop_assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
        }
    }
}

fn refine(spec: &ModelSpec) -> ModelSpec {
    let mut s = spec.clone();
    s.control.inla.dz /= 2.0;
    s
}

fn assert_refinement_stable(spec: &ModelSpec, data: &DataTable) {
    let coarse = fit(spec, data).unwrap();
    let fine = fit(&refine(spec), data).unwrap();
    assert!(fine.grid.points.len() > coarse.grid.points.len());
    let rows = |r: &FitResult| -> Vec<SummaryRow> {
        r.summary_fixed
            .iter()
            .chain(r.summary_random.iter().flat_map(|s| &s.rows))
            .cloned()
            .collect()
    };
    for (a, b) in rows(&coarse).iter().zip(rows(&fine)) {
        assert!(
            (a.mean - b.mean).abs() < 0.02 * b.sd,
            "{}: {} vs {} (sd {})",
            a.name,
            a.mean,
            b.mean,
            b.sd
        );
    }
}

#[test]
fn halving_the_grid_step_keeps_gaussian_means() {
    let (spec, data) = gaussian_iid(3, 60);
    assert_refinement_stable(&spec, &data);
}

#[test]
fn halving_the_grid_step_keeps_poisson_means() {
    let (spec, data) = poisson_iid(4, 60);
    assert_refinement_stable(&spec, &data);
}
