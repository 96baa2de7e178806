//! Mode of `log π̃(θ | y)` by BFGS with finite-difference gradients, and the
//! negative Hessian at the mode.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Objective evaluations must be pure functions of θ so that parallel
/// finite differences are reproducible.
pub trait Objective: Sync {
    fn eval(&self, theta: &[f64]) -> Result<f64>;
}

impl<F: Fn(&[f64]) -> Result<f64> + Sync> Objective for F {
    fn eval(&self, theta: &[f64]) -> Result<f64> {
        self(theta)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModeOptions {
    pub grad_step: f64,
    pub hess_step: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    /// Largest allowed step in internal units.
    pub max_step: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self {
            grad_step: 0.005,
            hess_step: 0.01,
            max_iter: 100,
            grad_tol: 1e-3,
            f_tol: 1e-4,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModeResult {
    pub theta: Vec<f64>,
    pub value: f64,
    /// Negative Hessian, symmetrised and floored to be positive definite.
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
}

fn shifted(theta: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    t[i] += h;
    t
}

/// Central-difference gradient, evaluated in parallel.
pub fn gradient(f: &dyn Objective, theta: &[f64], h: f64) -> Result<Vec<f64>> {
    (0..theta.len())
        .into_par_iter()
        .map(|i| Ok((f.eval(&shifted(theta, i, h))? - f.eval(&shifted(theta, i, -h))?) / (2.0 * h)))
        .collect()
}

/// Central-difference negative Hessian, symmetrised, with eigenvalues floored at `floor`.
pub fn neg_hessian(
    f: &dyn Objective,
    theta: &[f64],
    f0: f64,
    h: f64,
    floor: f64,
) -> Result<DMatrix<f64>> {
    let p = theta.len();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                let fp = f.eval(&shifted(theta, i, h))?;
                let fm = f.eval(&shifted(theta, i, -h))?;
                Ok(-(fp - 2.0 * f0 + fm) / (h * h))
            } else {
                let at = |a: f64, b: f64| {
                    let mut t = theta.to_vec();
                    t[i] += a;
                    t[j] += b;
                    f.eval(&t)
                };
                let v = at(h, h)? - at(h, -h)? - at(-h, h)? + at(-h, -h)?;
                Ok(-v / (4.0 * h * h))
            }
        })
        .collect::<Result<_>>()?;
    let mut hm = DMatrix::zeros(p, p);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        hm[(i, j)] = v;
        hm[(j, i)] = v;
    }
    Ok(floor_spd(&hm, floor))
}

/// Projects a symmetric matrix onto matrices with eigenvalues ≥ `floor`.
pub fn floor_spd(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let e = m.clone().symmetric_eigen();
    let l = e.eigenvalues.map(|v| v.max(floor));
    &e.eigenvectors * DMatrix::from_diagonal(&l) * e.eigenvectors.transpose()
}

/// Maximises `f` by BFGS with backtracking line search.
pub fn find_mode(f: &dyn Objective, start: &[f64], opt: &ModeOptions) -> Result<ModeResult> {
    let p = start.len();
    if p == 0 {
        let value = f.eval(start)?;
        return Ok(ModeResult {
            theta: Vec::new(),
            value,
            hessian: DMatrix::zeros(0, 0),
            iterations: 0,
        });
    }
    let mut x = DVector::from_column_slice(start);
    let mut fx = f.eval(start)?;
    // work with the minimisation of −f
    let mut g = -DVector::from_vec(gradient(f, start, opt.grad_step)?);
    let mut binv = DMatrix::<f64>::identity(p, p);
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    loop {
        if g.amax() < opt.grad_tol && last_change < opt.f_tol {
            break;
        }
        if iterations >= opt.max_iter {
            return Err(Error::MaxIterations(opt.max_iter));
        }
        iterations += 1;
        let mut d = -(&binv * &g);
        if d.dot(&g) >= 0.0 {
            // not a descent direction; restart from steepest descent
            binv = DMatrix::identity(p, p);
            d = -g.clone();
        }
        let norm = d.amax();
        if norm > opt.max_step {
            d *= opt.max_step / norm;
        }
        let slope = d.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xt = &x + step * &d;
            if let Ok(ft) = f.eval(xt.as_slice()) {
                if ft.is_finite() && -ft <= -fx + 1e-4 * step * slope {
                    accepted = Some((xt, ft));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            // no progress possible along d; accept the current point if the
            // gradient is already small, otherwise reset the curvature model
            if g.amax() < 10.0 * opt.grad_tol {
                break;
            }
            if binv == DMatrix::identity(p, p) {
                break;
            }
            binv = DMatrix::identity(p, p);
            last_change = f64::INFINITY;
            continue;
        };
        let gn = -DVector::from_vec(gradient(f, xn.as_slice(), opt.grad_step)?);
        let s = &xn - &x;
        let yv = &gn - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(p, p);
            let a = &i - rho * &s * yv.transpose();
            binv = &a * &binv * a.transpose() + rho * &s * s.transpose();
        }
        last_change = (fnew - fx).abs();
        x = xn;
        fx = fnew;
        g = gn;
    }
    let hessian = neg_hessian(f, x.as_slice(), fx, opt.hess_step, 1e-6)?;
    Ok(ModeResult {
        theta: x.as_slice().to_vec(),
        value: fx,
        hessian,
        iterations,
    })
}
