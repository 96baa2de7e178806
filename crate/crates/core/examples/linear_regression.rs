//! Gaussian linear regression on simulated data, checked against the exact
//! conjugate posterior at the modal noise precision.

use lgm::data::DataTable;
use lgm::engine::fit;
use lgm::oracle::conjugate_gaussian;
use lgm::spec::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> lgm::Result<()> {
    let n = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|xi| -2.0 + 1.5 * xi + 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let data = DataTable::from_columns(vec![("y".into(), y.clone()), ("x".into(), x.clone())])?;

    let spec = ModelSpec::parse(r#"{"response": "y", "fixed": ["1", "x"], "family": "gaussian"}"#)?;
    let r = fit(&spec, &data)?;

    println!("Fixed effects:");
    println!(
        "{:<14}{:>10}{:>10}{:>12}{:>12}{:>12}",
        "", "mean", "sd", "0.025quant", "0.5quant", "0.975quant"
    );
    for row in &r.summary_fixed {
        println!(
            "{:<14}{:>10.4}{:>10.4}{:>12.4}{:>12.4}{:>12.4}",
            row.name, row.mean, row.sd, row.q025, row.q50, row.q975
        );
    }
    println!("\nHyperparameters:");
    for row in &r.summary_hyperpar {
        println!("{:<40}{:>10.3}{:>10.3}", row.name, row.mean, row.sd);
    }

    let tau = r.marginals.hyperpar[0].1.mmarginal();
    let exact = conjugate_gaussian(&[vec![1.0; n], x], &y, &[0.001, 0.001], tau)?;
    println!("\nconjugate posterior at the modal precision {tau:.3}:");
    for (k, (m, s)) in exact.mean.iter().zip(exact.sd()).enumerate() {
        println!("  {:<12} mean {m:.4}  sd {s:.4}", r.summary_fixed[k].name);
    }
    println!(
        "log marginal likelihood {:.3}",
        r.diagnostics.mlik.unwrap_or(f64::NAN)
    );
    Ok(())
}
