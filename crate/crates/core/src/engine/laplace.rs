//! Gaussian approximation of `x | θ, y` and the Laplace approximation of `θ | y`.

use crate::error::{Error, Result};
use crate::families::DEFAULT_CURVATURE_FLOOR;
use crate::sparse::{CholFactor, ConstraintCorrection, PartialInverse, SparseSym};

use super::model::LatentModel;

/// Numerical settings of the inner optimisation. [`Settings::safe`] is the
/// conservative variant used when a fit is retried.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Initial Newton step length.
    pub step: f64,
    /// Floor on the likelihood curvature `−∂²ℓ/∂η²`.
    pub curvature_floor: f64,
    /// Multiplier on the fallback jitter `1e−5 · mean diag(P)`.
    pub jitter_scale: f64,
    pub max_newton: usize,
    /// Relative tolerance on `max |Δx|`.
    pub newton_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            step: 1.0,
            curvature_floor: DEFAULT_CURVATURE_FLOOR,
            jitter_scale: 1.0,
            max_newton: 50,
            newton_tol: 1e-6,
        }
    }
}

impl Settings {
    pub fn safe() -> Self {
        Self {
            step: 0.5,
            curvature_floor: 1e-4,
            jitter_scale: 10.0,
            ..Self::default()
        }
    }
}

/// Gaussian approximation at one θ.
#[derive(Debug, Clone)]
pub struct GaussianApprox {
    pub theta: Vec<f64>,
    pub x_mode: Vec<f64>,
    /// Factor of `P(θ) = Q(θ) + Aᵀ diag(h) A` at the mode.
    pub factor: CholFactor,
    pub correction: ConstraintCorrection,
    pub pinv: PartialInverse,
    /// Marginal variances of `x` under the constraints.
    pub diag_var: Vec<f64>,
    /// Log-likelihood at the mode.
    pub loglik: f64,
    /// `x*ᵀ Q x*`.
    pub quad: f64,
    /// Log-determinant of `Q(θ)` on the constraint space.
    pub logdet_q: f64,
    pub logdet_p: f64,
    /// `log det(C P⁻¹ Cᵀ)`.
    pub logdet_w: f64,
    pub log_prior: f64,
    /// `log π̃(θ | y)` including every normalising constant.
    pub log_post: f64,
    pub iterations: usize,
}

impl GaussianApprox {
    /// Mean and variance of `η_i = a_iᵀ x`.
    pub fn eta_moments(&self, model: &LatentModel) -> (Vec<f64>, Vec<f64>) {
        let mean = model.eta(&self.x_mode);
        let var = (0..model.n_obs())
            .map(|i| {
                let row = model.row(i);
                let idx: Vec<usize> = row.iter().map(|e| e.0).collect();
                let val: Vec<f64> = row.iter().map(|e| e.1).collect();
                let v = self
                    .pinv
                    .quad_form(&idx, &val)
                    .expect("rows of A lie in the pattern of P");
                (v - self.correction.lincomb_correction(&idx, &val)).max(0.0)
            })
            .collect();
        (mean, var)
    }
}

fn factor_with_fallback(model: &LatentModel, p: &SparseSym, s: &Settings) -> Result<CholFactor> {
    let sym = model.symbolic(p);
    match sym.factor(p, 0.0) {
        Ok(f) => Ok(f),
        Err(Error::NotPositiveDefinite { .. }) => {
            let d = p.diag();
            let mean = d.iter().sum::<f64>() / d.len().max(1) as f64;
            sym.factor(p, 1e-5 * mean.abs().max(f64::MIN_POSITIVE) * s.jitter_scale)
        }
        Err(e) => Err(e),
    }
}

fn log_lik(model: &LatentModel, eta: &[f64], fam: &[f64]) -> f64 {
    let y = &model.asm.y;
    let aux = &model.asm.aux;
    (0..y.len())
        .filter(|&i| !y[i].is_nan())
        .map(|i| model.family.loglik(y[i], eta[i], fam, aux[i]))
        .sum()
}

/// Newton iteration for the mode of `x | θ, y` under the linear constraints,
/// followed by the Laplace approximation of `log π(θ | y)`.
///
/// `start` must satisfy the constraints; `None` starts from zero.
pub fn gaussian_approximation(
    model: &LatentModel,
    theta: &[f64],
    start: Option<&[f64]>,
    s: &Settings,
) -> Result<GaussianApprox> {
    if theta.len() != model.n_theta() {
        return Err(Error::DimensionMismatch {
            expected: model.n_theta(),
            found: theta.len(),
        });
    }
    if !model.theta_in_domain(theta) {
        return Err(Error::Domain(format!(
            "θ = {theta:?} is outside the hyperparameter domain"
        )));
    }
    let n = model.n_latent();
    let hv = model.hyper_values(theta);
    let fam = &hv.family;
    let (qt, logdet_q) = model.prior_precision(&hv);
    let q = SparseSym::from_triplets(n, &qt)?;
    let y = &model.asm.y;
    let aux = &model.asm.aux;
    let c = model.constraints();

    let objective = |x: &[f64], eta: &[f64]| -0.5 * q.quad_form(x) + log_lik(model, eta, fam);
    let working = |eta: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut g = vec![0.0; y.len()];
        let mut h = vec![0.0; y.len()];
        for i in 0..y.len() {
            if !y[i].is_nan() {
                let (gi, hi) = model
                    .family
                    .working(y[i], eta[i], fam, aux[i], s.curvature_floor);
                g[i] = gi;
                h[i] = hi;
            }
        }
        (g, h)
    };

    let mut x = start.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut eta = model.eta(&x);
    let mut f_cur = objective(&x, &eta);
    let quadratic = model.family.is_quadratic();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < s.max_newton {
        iterations += 1;
        let (g, h) = working(&eta);
        let p = model.posterior_precision(&qt, &h)?;
        let f = factor_with_fallback(model, &p, s)?;
        let rhs_obs: Vec<f64> = (0..y.len()).map(|i| g[i] + h[i] * eta[i]).collect();
        let mut x_new = f.solve(&model.asm.design.a.tr_mul_vec(&rhs_obs))?;
        if !c.is_empty() {
            ConstraintCorrection::new(&f, c)?.correct(&mut x_new);
        }
        if quadratic {
            x = x_new;
            eta = model.eta(&x);
            converged = true;
            break;
        }
        let mut step = s.step;
        let (x_try, eta_try, f_try) = loop {
            let xt: Vec<f64> = x
                .iter()
                .zip(&x_new)
                .map(|(a, b)| a + step * (b - a))
                .collect();
            let et = model.eta(&xt);
            let ft = objective(&xt, &et);
            if ft.is_finite() && ft >= f_cur - 1e-10 * (1.0 + f_cur.abs()) || step < 1e-8 {
                break (xt, et, ft);
            }
            step *= 0.5;
        };
        let dx = x_try
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = 1.0 + x_try.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        x = x_try;
        eta = eta_try;
        f_cur = f_try;
        if !f_cur.is_finite() {
            break;
        }
        if dx < s.newton_tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }

    let (_, h) = working(&eta);
    let p = model.posterior_precision(&qt, &h)?;
    let factor = factor_with_fallback(model, &p, s)?;
    let correction = ConstraintCorrection::new(&factor, c)?;
    let pinv = factor.partial_inverse();
    let diag_var = pinv
        .diag()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - correction.var_correction(i)).max(0.0))
        .collect();
    let loglik = log_lik(model, &eta, fam);
    let quad = q.quad_form(&x);
    let logdet_p = factor.logdet();
    let logdet_w = correction.logdet_w();
    let log_prior = model.log_prior(theta);
    let log_post =
        log_prior + 0.5 * logdet_q - 0.5 * quad + loglik - 0.5 * logdet_p - 0.5 * logdet_w;
    if !log_post.is_finite() {
        return Err(Error::Domain(format!(
            "log posterior is not finite at θ = {theta:?}"
        )));
    }
    Ok(GaussianApprox {
        theta: theta.to_vec(),
        x_mode: x,
        factor,
        correction,
        pinv,
        diag_var,
        loglik,
        quad,
        logdet_q,
        logdet_p,
        logdet_w,
        log_prior,
        log_post,
        iterations,
    })
}

/// `log π̃(θ | y)`.
pub fn log_posterior_theta(
    model: &LatentModel,
    theta: &[f64],
    start: Option<&[f64]>,
    s: &Settings,
) -> Result<f64> {
    gaussian_approximation(model, theta, start, s).map(|g| g.log_post)
}
