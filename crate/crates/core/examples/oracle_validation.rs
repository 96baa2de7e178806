//! Checks the engine against a long adaptive Metropolis run on the exact
//! posterior of a Poisson model with a random intercept.

use std::time::Instant;

use lgm::data::DataTable;
use lgm::engine::fit;
use lgm::oracle::metropolis_lgm;
use lgm::spec::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

fn main() -> lgm::Result<()> {
    let groups = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let u: Vec<f64> = (0..groups)
        .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let (mut y, mut g, mut x) = (vec![], vec![], vec![]);
    for (k, uk) in u.iter().enumerate() {
        for _ in 0..8 {
            let xi: f64 = rng.sample(StandardNormal);
            let mu = (0.8 + 0.3 * xi + uk).exp();
            y.push(Poisson::new(mu).map_or(0.0, |p| p.sample(&mut rng)));
            g.push((k + 1) as f64);
            x.push(xi);
        }
    }
    let data = DataTable::from_columns(vec![("y".into(), y), ("x".into(), x), ("g".into(), g)])?;
    let spec = ModelSpec::parse(
        r#"{"response": "y", "fixed": ["1", "x"], "family": "poisson",
            "random": [{"id": "g", "model": "iid",
                        "hyper": {"prec": {"prior": "pc.prec", "param": [1, 0.01]}}}]}"#,
    )?;

    let t0 = Instant::now();
    let r = fit(&spec, &data)?;
    let t_fit = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let c = metropolis_lgm(&spec, &data, 200_000, 1)?;
    let t_mcmc = t0.elapsed().as_secs_f64();
    println!("engine {t_fit:.3} s, Metropolis {t_mcmc:.1} s\n");

    println!(
        "{:<14} {:>9} {:>9} {:>9} {:>9} {:>8}",
        "", "engine", "chain", "sd", "chain sd", "Δ/sd"
    );
    let rows = r.summary_fixed.iter().chain(&r.summary_random[0].rows);
    for (j, row) in rows.enumerate() {
        let name = if j < 2 {
            row.name.clone()
        } else {
            format!("g:{}", row.name)
        };
        println!(
            "{:<14} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>8.3}",
            name,
            row.mean,
            c.mean[j],
            row.sd,
            c.sd[j],
            (row.mean - c.mean[j]) / c.sd[j]
        );
    }
    Ok(())
}
