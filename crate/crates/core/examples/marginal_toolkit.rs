//! Working with a tabulated posterior marginal: density, distribution,
//! quantiles, transforms, expectations, HPD intervals and random draws.

use lgm::marginals::Marginal;

fn main() -> lgm::Result<()> {
    // a log-precision marginal, as a fit would return it
    let m = Marginal::gaussian(1.2, 0.4, 75, 6.0)?;
    let z = m.zmarginal()?;
    println!(
        "log τ: mean {:.4} sd {:.4} median {:.4} [{:.4}, {:.4}]",
        z.mean, z.sd, z.median, z.q025, z.q975
    );
    println!(
        "density at the mean {:.4}, P(log τ < 1) = {:.4}",
        m.dmarginal(1.2),
        m.pmarginal(1.0)
    );
    println!(
        "quantile(0.9) = {:.4}, mode = {:.4}",
        m.qmarginal(0.9)?,
        m.mmarginal()
    );

    // precision and standard deviation scales
    let tau = m.tmarginal(f64::exp)?;
    let sigma = m.tmarginal(|t| (-0.5 * t).exp())?;
    let zt = tau.zmarginal()?;
    println!(
        "τ: mean {:.4} (exact {:.4}), E[τ] by quadrature {:.4}",
        zt.mean,
        (1.2f64 + 0.08).exp(),
        m.emarginal(f64::exp)
    );
    let (lo, hi) = tau.hpdmarginal(0.95)?;
    println!(
        "τ 95% HPD [{lo:.3}, {hi:.3}] (width {:.3}) vs equal-tailed width {:.3}",
        hi - lo,
        zt.q975 - zt.q025
    );
    println!("σ: median {:.4}", sigma.qmarginal(0.5)?);

    let draws = m.rmarginal(10_000, 1);
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    println!("mean of 10000 draws {mean:.4}");
    Ok(())
}
