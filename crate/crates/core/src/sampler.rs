//! Draws from the fitted approximation to the joint posterior.
//!
//! Every draw `d` uses its own ChaCha8 stream: the generator is seeded with
//! the user seed and switched to stream `d`, so draws are identical whether
//! they are produced serially or in parallel.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::engine::{FitResult, PointFit, ThetaGrid};
use crate::error::{Error, Result};

/// One joint draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Free hyperparameters on the internal scale.
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
}

fn rng_for(seed: u64, draw: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    rng
}

fn pick<T>(grid: &ThetaGrid<T>, u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in grid.points.iter().enumerate() {
        acc += p.weight;
        if u < acc {
            return k;
        }
    }
    grid.points.len() - 1
}

/// `n` joint draws of `(θ, x)`. Requires `control.compute.config`.
pub fn posterior_sample(n: usize, fit: &FitResult, seed: u64) -> Result<Vec<Sample>> {
    if !fit.has_config() {
        return Err(Error::ConfigNotStored);
    }
    (0..n)
        .into_par_iter()
        .map(|d| {
            let mut rng = rng_for(seed, d);
            let k = pick(&fit.grid, rng.gen());
            let point = &fit.grid.points[k];
            let PointFit { x_mode, config, .. } = &point.payload;
            let cfg = config.as_ref().expect("checked above");
            let mut x = cfg.factor.sample(x_mode, &mut rng)?;
            cfg.correction.correct(&mut x);
            Ok(Sample {
                theta: point.theta.clone(),
                x,
            })
        })
        .collect()
}

/// Options for [`hyperpar_sample`].
#[derive(Debug, Clone, Copy)]
pub struct HyperSampleOptions {
    /// Return internal-scale values rather than natural-scale ones.
    pub intern: bool,
    /// Spread each draw over its grid cell. Off gives exact grid resampling.
    pub cell_noise: bool,
}

impl Default for HyperSampleOptions {
    fn default() -> Self {
        Self {
            intern: false,
            cell_noise: true,
        }
    }
}

/// `n` draws of the free hyperparameters.
///
/// A grid point is chosen by weight and then moved within its cell by
/// independent normal noise in the standardised coordinates, with the sd of a
/// uniform variable on a cell of width `δz` (or unit sd when the grid is the
/// mode alone).
pub fn hyperpar_sample(
    n: usize,
    fit: &FitResult,
    seed: u64,
    opts: HyperSampleOptions,
) -> Vec<Vec<f64>> {
    let grid = &fit.grid;
    let p = grid.dim();
    let s = grid.scaling();
    let noise_sd = if grid.points.len() == 1 {
        1.0
    } else {
        grid.dz / 12f64.sqrt()
    };
    let transforms: Vec<_> = fit.model.free_hypers().map(|h| h.transform()).collect();
    (0..n)
        .into_par_iter()
        .map(|d| {
            let mut rng = rng_for(seed, d);
            let k = pick(grid, rng.gen());
            let mut z = grid.points[k].z.clone();
            if opts.cell_noise {
                for zl in z.iter_mut() {
                    *zl += noise_sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
            let theta: Vec<f64> = (0..p)
                .map(|j| grid.mode[j] + (0..p).map(|l| s[(j, l)] * z[l]).sum::<f64>())
                .collect();
            if opts.intern {
                theta
            } else {
                theta
                    .iter()
                    .zip(&transforms)
                    .map(|(&t, tr)| tr.from_internal(t))
                    .collect()
            }
        })
        .collect()
}

/// What to extract from each draw.
pub enum Selector<'a> {
    /// A latent block or element by name: a fixed effect, `"1"`, a component
    /// id, or `"id:k"` with `k` 1-based. `"Predictor"` selects `η = A x`.
    Name(&'a str),
    /// An arbitrary function of the labelled draw.
    Func(&'a (dyn Fn(&Draw) -> Vec<f64> + Sync)),
}

/// A draw with name-based access.
pub struct Draw<'a> {
    pub sample: &'a Sample,
    fit: &'a FitResult,
}

impl Draw<'_> {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.fit
            .model
            .asm
            .layout
            .lookup(name)
            .map(|r| &self.sample.x[r])
    }

    pub fn eta(&self) -> Vec<f64> {
        self.fit.model.eta(&self.sample.x)
    }

    /// Natural-scale free hyperparameters.
    pub fn hyper(&self) -> Vec<f64> {
        self.fit
            .model
            .free_hypers()
            .zip(&self.sample.theta)
            .map(|(h, &t)| h.transform().from_internal(t))
            .collect()
    }
}

/// Applies `sel` to every draw.
pub fn posterior_sample_eval(
    sel: Selector<'_>,
    samples: &[Sample],
    fit: &FitResult,
) -> Result<Vec<Vec<f64>>> {
    samples
        .par_iter()
        .map(|s| {
            let d = Draw { sample: s, fit };
            match &sel {
                Selector::Name("Predictor") => Ok(d.eta()),
                Selector::Name(name) => d
                    .get(name)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::Domain(format!("no latent block named `{name}`"))),
                Selector::Func(f) => Ok(f(&d)),
            }
        })
        .collect()
}
