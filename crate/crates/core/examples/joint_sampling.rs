//! Joint posterior draws from an AR(1) model: conditioning on the stored
//! configurations, extracting blocks by name, derived quantities per draw,
//! and hyperparameter draws on both scales.

use lgm::data::DataTable;
use lgm::engine::fit;
use lgm::sampler::{
    hyperpar_sample, posterior_sample, posterior_sample_eval, Draw, HyperSampleOptions, Selector,
};
use lgm::spec::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> lgm::Result<()> {
    let n = 200;
    let rho = 0.8;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut u = vec![0.0; n];
    u[0] = rng.sample(StandardNormal);
    for t in 1..n {
        u[t] =
            rho * u[t - 1] + (1.0 - rho * rho as f64).sqrt() * rng.sample::<f64, _>(StandardNormal);
    }
    let y: Vec<f64> = u
        .iter()
        .map(|ut| 2.0 + ut + 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let data = DataTable::from_columns(vec![("y".into(), y), ("t".into(), t)])?;

    let spec = ModelSpec::parse(
        r#"{"response": "y", "fixed": ["1"],
            "random": [{"id": "t", "model": "ar1"}],
            "control": {"compute": {"config": true}}}"#,
    )?;
    let r = fit(&spec, &data)?;
    for row in &r.summary_hyperpar {
        println!(
            "{:<36} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            row.name, row.mean, row.sd, row.q025, row.q975
        );
    }

    let draws = posterior_sample(5000, &r, 2024)?;
    let intercept = posterior_sample_eval(Selector::Name("1"), &draws, &r)?;
    let m = intercept.iter().map(|v| v[0]).sum::<f64>() / intercept.len() as f64;
    println!(
        "\nintercept: sample mean {m:.4}, summary mean {:.4}",
        r.summary_fixed[0].mean
    );

    // probability that the latent process ends above where it started
    let rise = |d: &Draw| -> Vec<f64> {
        let u = d.get("t").unwrap_or(&[]);
        vec![f64::from(u.last() > u.first())]
    };
    let p = posterior_sample_eval(Selector::Func(&rise), &draws, &r)?;
    println!(
        "P(u_200 > u_1) ≈ {:.3}",
        p.iter().map(|v| v[0]).sum::<f64>() / p.len() as f64
    );

    let nat = hyperpar_sample(5000, &r, 1, HyperSampleOptions::default());
    let int = hyperpar_sample(
        5000,
        &r,
        1,
        HyperSampleOptions {
            intern: true,
            ..Default::default()
        },
    );
    let mean = |v: &[Vec<f64>], j: usize| v.iter().map(|d| d[j]).sum::<f64>() / v.len() as f64;
    for (j, row) in r.summary_hyperpar.iter().enumerate() {
        println!(
            "{:<36} natural {:>8.3}  internal {:>8.3}",
            row.name,
            mean(&nat, j),
            mean(&int, j)
        );
    }
    Ok(())
}
