//! Poisson GLMM for goals scored in a simulated league: home advantage,
//! team attack and defence effects, and season simulation from joint
//! posterior draws.

use lgm::datasets::{football, football_spec, League};
use lgm::engine::fit;
use lgm::sampler::{posterior_sample, posterior_sample_eval, Draw, Selector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn main() -> lgm::Result<()> {
    let league = League::default();
    let data = football(&league)?;
    let mut spec = football_spec();
    spec.control.compute.config = true;
    let r = fit(&spec, &data)?;

    for row in r.summary_fixed.iter().chain(&r.summary_hyperpar) {
        println!(
            "{:<28} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            row.name, row.mean, row.sd, row.q025, row.q975
        );
    }
    println!("true home effect {:.3}", league.home);

    let attack = &r.summary_random[0].rows;
    let best = attack
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
        .map(|(k, _)| k + 1)
        .unwrap_or(0);
    println!("strongest attack: team {best}");

    // expected points per team over a replayed season, one season per draw
    let goals = data.column("goals").unwrap_or(&[]);
    let (att, def) = (
        data.column("attack").unwrap_or(&[]),
        data.column("defense").unwrap_or(&[]),
    );
    let teams = league.teams;
    let matches: Vec<(usize, usize, usize)> = (0..goals.len())
        .step_by(2)
        .map(|i| (i, att[i] as usize - 1, def[i] as usize - 1))
        .collect();
    let season = |d: &Draw| -> Vec<f64> {
        let eta = d.eta();
        let mut rng = ChaCha8Rng::seed_from_u64(d.sample.x[0].to_bits());
        let mut pts = vec![0.0; teams];
        for &(i, home, away) in &matches {
            let gh = Poisson::new(eta[i].exp()).map_or(0.0, |p| p.sample(&mut rng));
            let ga = Poisson::new(eta[i + 1].exp()).map_or(0.0, |p| p.sample(&mut rng));
            match gh.total_cmp(&ga) {
                std::cmp::Ordering::Greater => pts[home] += 3.0,
                std::cmp::Ordering::Less => pts[away] += 3.0,
                std::cmp::Ordering::Equal => {
                    pts[home] += 1.0;
                    pts[away] += 1.0;
                }
            }
        }
        pts
    };
    let draws = posterior_sample(1000, &r, 7)?;
    let seasons = posterior_sample_eval(Selector::Func(&season), &draws, &r)?;
    let mean_pts: Vec<f64> = (0..teams)
        .map(|t| seasons.iter().map(|s| s[t]).sum::<f64>() / seasons.len() as f64)
        .collect();
    for (t, p) in mean_pts.iter().enumerate() {
        println!("team {:>2}: {:>5.1} expected points", t + 1, p);
    }
    Ok(())
}
