//! Posterior marginals and summaries from the θ grid.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::interp::Pchip;
use crate::marginals::Marginal;
use crate::priors::Transform;
use crate::sparse::{CholFactor, ConstraintCorrection};
use crate::util::normal_quadrature;

use super::grid::ThetaGrid;

/// Points per stored marginal.
pub const MARGINAL_POINTS: usize = 75;
/// Half-width of latent marginal grids in mixture standard deviations.
const LATENT_WIDTH: f64 = 6.0;
/// Log-density drop at which hyperparameter marginals are truncated.
const HYPER_TAIL_DROP: f64 = 14.0;

/// What is kept from the Gaussian approximation at each grid point.
#[derive(Debug, Clone)]
pub struct PointFit {
    pub x_mode: Vec<f64>,
    /// Constrained marginal variances of `x`.
    pub diag_var: Vec<f64>,
    pub eta_mean: Vec<f64>,
    pub eta_var: Vec<f64>,
    /// Family hyperparameters on the internal scale.
    pub family_theta: Vec<f64>,
    pub config: Option<Config>,
}

/// Stored factorisation for joint sampling.
#[derive(Debug, Clone)]
pub struct Config {
    pub factor: CholFactor,
    pub correction: ConstraintCorrection,
}

/// One row of a summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    pub mode: f64,
    pub kld: f64,
}

impl SummaryRow {
    pub const HEADER: [&'static str; 7] = [
        "mean",
        "sd",
        "0.025quant",
        "0.5quant",
        "0.975quant",
        "mode",
        "kld",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.mean, self.sd, self.q025, self.q50, self.q975, self.mode, self.kld,
        ]
    }

    fn from_marginal(name: String, m: &Marginal, mean: f64, sd: f64, kld: f64) -> Result<Self> {
        Ok(Self {
            name,
            mean,
            sd,
            q025: m.qmarginal(0.025)?,
            q50: m.qmarginal(0.5)?,
            q975: m.qmarginal(0.975)?,
            mode: m.mmarginal(),
            kld,
        })
    }
}

/// A mixture `Σ_k w_k N(μ_k, σ²_k)`.
#[derive(Debug, Clone)]
pub struct GaussMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

impl GaussMixture {
    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w * m)
            .sum()
    }

    pub fn var(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.vars)
            .map(|((w, m), v)| w * (v + (m - mean) * (m - mean)))
            .sum();
        second.max(0.0)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.vars)
            .map(|((w, m), v)| w * (-0.5 * (x - m) * (x - m) / v).exp() / (2.0 * PI * v).sqrt())
            .sum()
    }

    /// Mixture with every variance floored so that densities stay finite.
    fn floored(mut self) -> Self {
        let scale = self.means.iter().fold(1.0_f64, |a, m| a.max(m.abs()));
        let floor = (1e-10 * scale).powi(2);
        self.vars.iter_mut().for_each(|v| *v = v.max(floor));
        self
    }

    pub fn marginal(&self) -> Result<Marginal> {
        let mean = self.mean();
        let sd = self.var().sqrt();
        Marginal::from_fn(
            mean - LATENT_WIDTH * sd,
            mean + LATENT_WIDTH * sd,
            MARGINAL_POINTS,
            |x| self.density(x),
        )
    }

    /// `KL(N(μ₀, σ²₀) ‖ mixture)` for the reference component `k0`.
    pub fn kld_from(&self, k0: usize) -> f64 {
        if self.weights.len() == 1 {
            return 0.0;
        }
        let (m0, v0) = (self.means[k0], self.vars[k0]);
        let s0 = v0.sqrt();
        let (t, w) = normal_quadrature(21);
        let kl: f64 = t
            .iter()
            .zip(&w)
            .map(|(&t, &w)| {
                let x = m0 + s0 * t;
                let log_ref = -0.5 * t * t - 0.5 * (2.0 * PI * v0).ln();
                w * (log_ref - self.density(x).max(f64::MIN_POSITIVE).ln())
            })
            .sum();
        kl.max(0.0)
    }
}

/// Summary and marginal of a mixture named `name`; `k0` is the modal component.
pub fn mixture_summary(
    name: String,
    mix: GaussMixture,
    k0: usize,
) -> Result<(SummaryRow, Marginal)> {
    let mix = mix.floored();
    let m = mix.marginal()?;
    let row = SummaryRow::from_marginal(name, &m, mix.mean(), mix.var().sqrt(), mix.kld_from(k0))?;
    Ok((row, m))
}

fn mode_index<T>(grid: &ThetaGrid<T>) -> usize {
    grid.points
        .iter()
        .position(|p| p.index.iter().all(|&i| i == 0))
        .expect("mode is a grid point")
}

/// Mixture for latent element `j`.
pub fn latent_mixture(grid: &ThetaGrid<PointFit>, j: usize) -> GaussMixture {
    GaussMixture {
        weights: grid.points.iter().map(|p| p.weight).collect(),
        means: grid.points.iter().map(|p| p.payload.x_mode[j]).collect(),
        vars: grid.points.iter().map(|p| p.payload.diag_var[j]).collect(),
    }
}

/// Mixture for the linear predictor of observation `i`.
pub fn fitted_mixture(grid: &ThetaGrid<PointFit>, i: usize) -> GaussMixture {
    GaussMixture {
        weights: grid.points.iter().map(|p| p.weight).collect(),
        means: grid.points.iter().map(|p| p.payload.eta_mean[i]).collect(),
        vars: grid.points.iter().map(|p| p.payload.eta_var[i]).collect(),
    }
}

/// Summaries and marginals of latent elements `range`, named by `name(j)`.
pub fn latent_summaries(
    grid: &ThetaGrid<PointFit>,
    range: std::ops::Range<usize>,
    name: impl Fn(usize) -> String + Sync,
) -> Result<Vec<(SummaryRow, Marginal)>> {
    let k0 = mode_index(grid);
    range
        .into_par_iter()
        .map(|j| mixture_summary(name(j), latent_mixture(grid, j), k0))
        .collect()
}

pub fn fitted_summaries(
    grid: &ThetaGrid<PointFit>,
    n_obs: usize,
) -> Result<Vec<(SummaryRow, Marginal)>> {
    let k0 = mode_index(grid);
    let width = n_obs.to_string().len();
    (0..n_obs)
        .into_par_iter()
        .map(|i| {
            mixture_summary(
                format!("fitted.Predictor.{:0width$}", i + 1),
                fitted_mixture(grid, i),
                k0,
            )
        })
        .collect()
}

/// Log-density of one standardised coordinate `z_l` on a dense grid.
fn axis_density<T>(grid: &ThetaGrid<T>, l: usize) -> (Vec<f64>, Vec<f64>) {
    // the log-density along the axis through the mode; in standardised
    // coordinates it is also the marginal when the posterior is near Gaussian
    let mut by_index: std::collections::BTreeMap<i32, f64> = Default::default();
    let lp0 = grid.mode_point().log_post;
    for p in &grid.points {
        if p.index.iter().enumerate().all(|(m, &i)| m == l || i == 0) {
            by_index.insert(p.index[l], (p.log_post - lp0).exp());
        }
    }
    let z: Vec<f64> = by_index.keys().map(|&i| i as f64 * grid.dz).collect();
    let ld: Vec<f64> = by_index
        .values()
        .map(|w| w.max(f64::MIN_POSITIVE).ln())
        .collect();
    let (z, ld) = if z.len() < 3 {
        // too few points to say more than the Hessian does
        let z = vec![-1.0, 0.0, 1.0];
        let ld = z.iter().map(|t| -0.5 * t * t).collect();
        (z, ld)
    } else {
        (z, ld)
    };
    let top = ld.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pchip = Pchip::new(z.clone(), ld.clone());
    let n = z.len();
    let lo_tail = Tail::fit([z[0], z[1], z[2]], [ld[0], ld[1], ld[2]]);
    let hi_tail = Tail::fit(
        [z[n - 1], z[n - 2], z[n - 3]],
        [ld[n - 1], ld[n - 2], ld[n - 3]],
    );
    let a = lo_tail.reach(top - HYPER_TAIL_DROP);
    let b = hi_tail.reach(top - HYPER_TAIL_DROP);
    let m = 801;
    let xs: Vec<f64> = (0..m)
        .map(|i| a + (b - a) * i as f64 / (m - 1) as f64)
        .collect();
    let ds = xs
        .iter()
        .map(|&t| {
            let l = if t < z[0] {
                lo_tail.eval(t)
            } else if t > z[n - 1] {
                hi_tail.eval(t)
            } else {
                pchip.eval(t)
            };
            (l - top).exp()
        })
        .collect();
    (xs, ds)
}

/// Extrapolation of a log-density beyond the outermost grid value `z0`:
/// the parabola through the three outermost points when it keeps decaying,
/// otherwise a straight line.
#[derive(Debug, Clone, Copy)]
struct Tail {
    z0: f64,
    /// +1 for an upper tail, −1 for a lower one.
    dir: f64,
    l0: f64,
    /// Outward rate of decay at `z0`, positive.
    slope: f64,
    /// Outward curvature, ≤ 0.
    curv: f64,
}

impl Tail {
    /// `z[0]` is the outermost point, `z[1]` and `z[2]` lie inwards.
    fn fit(z: [f64; 3], l: [f64; 3]) -> Self {
        let dir = (z[0] - z[1]).signum();
        // outward coordinates s = dir·(z − z0)
        let s1 = dir * (z[1] - z[0]);
        let s2 = dir * (z[2] - z[0]);
        let d1 = (l[1] - l[0]) / s1;
        let d2 = (l[2] - l[0]) / s2;
        let curv = (d1 - d2) / (s1 - s2);
        let slope0 = d1 - curv * s1;
        let (slope, curv) = if curv < 0.0 && slope0 < 0.0 {
            (-slope0, curv)
        } else {
            let secant = -d1;
            (
                if secant > 0.0 {
                    secant
                } else {
                    z[0].abs().max(1.0)
                },
                0.0,
            )
        };
        Self {
            z0: z[0],
            dir,
            l0: l[0],
            slope,
            curv,
        }
    }

    fn eval(&self, z: f64) -> f64 {
        let s = (z - self.z0).abs();
        self.l0 - self.slope * s + self.curv * s * s
    }

    /// The point beyond `z0` where the log-density reaches `target`, capped at 10 units.
    fn reach(&self, target: f64) -> f64 {
        let drop = (self.l0 - target).max(0.0);
        let s = if self.curv < 0.0 {
            let a = -self.curv;
            (-self.slope + (self.slope * self.slope + 4.0 * a * drop).sqrt()) / (2.0 * a)
        } else {
            drop / self.slope
        };
        self.z0 + self.dir * s.min(10.0)
    }
}

fn lin_interp(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    if t <= xs[0] || t >= xs[xs.len() - 1] {
        return 0.0;
    }
    let k = xs.partition_point(|&x| x <= t) - 1;
    let f = (t - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] * (1.0 - f) + ys[k + 1] * f
}

/// Marginal of `θ_j` on the internal scale.
pub fn hyper_internal_marginal<T>(grid: &ThetaGrid<T>, j: usize) -> Result<Marginal> {
    let s = grid.scaling();
    let p = grid.dim();
    let axes: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..p)
        .map(|l| {
            let (z, d) = axis_density(grid, l);
            (s[(j, l)], z, d)
        })
        .collect();
    let cmax = axes.iter().fold(0.0_f64, |a, c| a.max(c.0.abs()));
    let active: Vec<&(f64, Vec<f64>, Vec<f64>)> =
        axes.iter().filter(|c| c.0.abs() > 1e-10 * cmax).collect();

    // density of u = Σ c_l z_l on a fine uniform grid
    let span: f64 = active
        .iter()
        .map(|(c, z, _)| c.abs() * (z[z.len() - 1] - z[0]))
        .sum();
    let h = span / 2000.0;
    let mut start = 0.0;
    let mut dens = vec![1.0];
    for (c, z, d) in active {
        let (ulo, uhi) = if *c > 0.0 {
            (c * z[0], c * z[z.len() - 1])
        } else {
            (c * z[z.len() - 1], c * z[0])
        };
        let k0 = (ulo / h).floor() as i64;
        let k1 = (uhi / h).ceil() as i64;
        let f: Vec<f64> = (k0..=k1)
            .map(|k| lin_interp(z, d, k as f64 * h / c))
            .collect();
        let mut out = vec![0.0; dens.len() + f.len() - 1];
        for (a, &da) in dens.iter().enumerate() {
            if da == 0.0 {
                continue;
            }
            for (b, &fb) in f.iter().enumerate() {
                out[a + b] += da * fb;
            }
        }
        start += k0 as f64 * h;
        dens = out;
    }
    let top = dens.iter().cloned().fold(0.0, f64::max);
    let keep = |v: &f64| *v > 1e-9 * top;
    let first = dens.iter().position(keep).unwrap_or(0).saturating_sub(1);
    let last = (dens.iter().rposition(keep).unwrap_or(dens.len() - 1) + 1).min(dens.len() - 1);
    let us: Vec<f64> = (0..dens.len()).map(|k| start + k as f64 * h).collect();
    let (a, b) = (us[first], us[last]);
    let mode = grid.mode[j];
    Marginal::from_fn(mode + a, mode + b, MARGINAL_POINTS, |t| {
        lin_interp(&us, &dens, t - mode).max(0.0)
    })
}

/// Summary row and natural-scale marginal of a hyperparameter.
pub fn hyper_summary(
    name: String,
    internal: &Marginal,
    t: Transform,
) -> Result<(SummaryRow, Marginal)> {
    let natural = internal.tmarginal_with(|v| t.from_internal(v), |v| t.derivative(v))?;
    let z = natural.zmarginal()?;
    let row = SummaryRow {
        name,
        mean: z.mean,
        sd: z.sd,
        q025: z.q025,
        q50: z.median,
        q975: z.q975,
        mode: natural.mmarginal(),
        kld: 0.0,
    };
    Ok((row, natural))
}
