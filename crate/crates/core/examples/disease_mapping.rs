//! Scaled BYM model for the Scottish lip cancer data: fixed effects,
//! hyperparameters, spatial fraction, exceedance probabilities, DIC and WAIC.

use std::time::Instant;

use lgm::datasets::{scotland, scotland_spec};
use lgm::engine::fit;
use lgm::sampler::{hyperpar_sample, HyperSampleOptions};

fn main() -> lgm::Result<()> {
    let data = scotland();
    let spec = scotland_spec();
    let t0 = Instant::now();
    let r = fit(&spec, &data)?;
    println!("fitted in {:.2} s", t0.elapsed().as_secs_f64());

    println!(
        "{:<40} {:>10} {:>10} {:>10} {:>10}",
        "", "mean", "sd", "0.025q", "0.975q"
    );
    for row in r.summary_fixed.iter().chain(&r.summary_hyperpar) {
        println!(
            "{:<40} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            row.name, row.mean, row.sd, row.q025, row.q975
        );
    }

    // spatial fraction from internal-scale draws: columns are log τ_iid, log τ_spatial
    let draws = hyperpar_sample(
        100_000,
        &r,
        1,
        HyperSampleOptions {
            intern: true,
            cell_noise: true,
        },
    );
    let phi: Vec<f64> = draws
        .iter()
        .map(|t| {
            let (v_iid, v_sp) = ((-t[0]).exp(), (-t[1]).exp());
            v_sp / (v_iid + v_sp)
        })
        .collect();
    println!(
        "spatial fraction: {:.3}",
        phi.iter().sum::<f64>() / phi.len() as f64
    );

    let mut exceed = 0;
    for m in &r.marginals.fitted {
        let rr = m.tmarginal(f64::exp)?;
        if 1.0 - rr.pmarginal(1.0) > 0.95 {
            exceed += 1;
        }
    }
    println!("districts with P(RR > 1) > 0.95: {exceed}");
    let d = &r.diagnostics;
    println!(
        "DIC {:.2}  WAIC {:.2}  mlik {:.3}",
        d.dic.unwrap().dic,
        d.waic.unwrap().waic,
        d.mlik.unwrap()
    );
    println!("safe mode used: {}", r.used_safe_mode);
    Ok(())
}
