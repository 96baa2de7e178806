//! Monthly series with a smooth trend (second-order random walk) and a
//! cyclic seasonal effect; the last year is held out as missing and
//! forecast from the fitted linear predictor.

use lgm::data::DataTable;
use lgm::engine::fit;
use lgm::spec::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> lgm::Result<()> {
    let years = 8;
    let n = 12 * years;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let month: Vec<f64> = (0..n).map(|i| (i % 12 + 1) as f64).collect();
    let truth: Vec<f64> = t
        .iter()
        .map(|&ti| {
            10.0 + 0.03 * ti
                + 0.5 * (ti / 20.0).sin()
                + 1.5 * (2.0 * std::f64::consts::PI * ti / 12.0).cos()
        })
        .collect();
    let mut y: Vec<f64> = truth
        .iter()
        .map(|m| m + 0.3 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let held_out = n - 12;
    for v in &mut y[held_out..] {
        *v = f64::NAN;
    }
    let data = DataTable::from_columns(vec![
        ("y".into(), y),
        ("t".into(), t),
        ("month".into(), month),
    ])?;

    let spec = ModelSpec::parse(
        r#"{"response": "y", "fixed": ["1"],
            "random": [
              {"id": "t", "model": "rw2", "constr": true, "scale.model": true},
              {"id": "month", "model": "rw1", "cyclic": true, "constr": true, "scale.model": true}
            ]}"#,
    )?;
    let r = fit(&spec, &data)?;
    for row in &r.summary_hyperpar {
        println!("{:<36} {:>10.3} {:>10.3}", row.name, row.mean, row.sd);
    }
    println!(
        "\n{:>5} {:>8} {:>8} {:>8} {:>8}",
        "t", "truth", "mean", "lower", "upper"
    );
    let mut covered = 0;
    for i in held_out..n {
        let f = &r.summary_fitted[i];
        covered += usize::from(f.q025 <= truth[i] && truth[i] <= f.q975);
        println!(
            "{:>5} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            i + 1,
            truth[i],
            f.mean,
            f.q025,
            f.q975
        );
    }
    println!("truth inside the 95% band for {covered} of 12 months");
    Ok(())
}
