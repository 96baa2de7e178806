//! Reference computations for validating the engine: the conjugate Gaussian
//! linear model, brute-force quadrature for tiny latent fields, and a
//! random-walk Metropolis sampler for small models.
//!
//! All three reuse the likelihood and prior code of the engine, so any
//! disagreement isolates the approximation rather than the model.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::DataTable;
use crate::engine::LatentModel;
use crate::error::{Error, Result};
use crate::marginals::Marginal;
use crate::sparse::SparseSym;
use crate::spec::ModelSpec;

/// Exact posterior of `β` in `y ~ N(Xβ, τ⁻¹ I)`, `β ~ N(0, diag(prior_prec)⁻¹)`.
#[derive(Debug, Clone)]
pub struct Conjugate {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    /// `log p(y)`, all constants included.
    pub log_evidence: f64,
}

impl Conjugate {
    pub fn sd(&self) -> Vec<f64> {
        self.cov.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

/// `x` holds the columns of the design matrix.
pub fn conjugate_gaussian(
    x: &[Vec<f64>],
    y: &[f64],
    prior_prec: &[f64],
    noise_prec: f64,
) -> Result<Conjugate> {
    let n = y.len();
    let p = x.len();
    if prior_prec.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: prior_prec.len(),
        });
    }
    if let Some(c) = x.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.len(),
        });
    }
    let xm = DMatrix::from_fn(n, p, |i, j| x[j][i]);
    let yv = DVector::from_column_slice(y);
    let prec = DMatrix::from_diagonal(&DVector::from_column_slice(prior_prec))
        + noise_prec * xm.transpose() * &xm;
    let chol = prec
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { pivot: 0 })?;
    let b = noise_prec * xm.transpose() * &yv;
    let mean = chol.solve(&b);
    let logdet_p = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let logdet_prior: f64 = prior_prec.iter().map(|v| v.ln()).sum();
    let log_evidence = -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
        + 0.5 * n as f64 * noise_prec.ln()
        + 0.5 * logdet_prior
        - 0.5 * logdet_p
        - 0.5 * (noise_prec * yv.dot(&yv) - b.dot(&mean));
    Ok(Conjugate {
        mean: mean.as_slice().to_vec(),
        cov: chol.inverse(),
        log_evidence,
    })
}

/// Marginals of every latent element computed on a tensor grid.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    pub marginals: Vec<Marginal>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Brute-force posterior of a latent field with at most three elements and
/// no free hyperparameters, on `points` nodes per dimension.
pub fn dense_grid_posterior(model: &LatentModel, points: usize) -> Result<GridPosterior> {
    let n = model.n_latent();
    if n == 0 || n > 3 {
        return Err(Error::Domain(format!(
            "dense grid posterior needs 1 to 3 latent elements, got {n}"
        )));
    }
    if model.n_theta() > 0 || !model.constraints().is_empty() {
        return Err(Error::Domain(
            "dense grid posterior needs fixed hyperparameters and no constraints".into(),
        ));
    }
    let hv = model.hyper_values(&[]);
    let (qt, _) = model.prior_precision(&hv);
    let q = SparseSym::from_triplets(n, &qt)?;
    let log_joint = |x: &[f64]| -> f64 {
        let eta = model.eta(x);
        let ll: f64 = (0..model.n_obs())
            .filter(|&i| !model.asm.y[i].is_nan())
            .map(|i| {
                model
                    .family
                    .loglik(model.asm.y[i], eta[i], &hv.family, model.asm.aux[i])
            })
            .sum();
        ll - 0.5 * q.quad_form(x)
    };

    // locate the bulk with a dense Newton iteration and a finite-difference Hessian
    let (centre, hess) = dense_mode(&log_joint, n)?;
    let cov = hess
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite { pivot: 0 })?;
    let half: Vec<f64> = (0..n).map(|j| 10.0 * cov[(j, j)].sqrt()).collect();
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..points)
                .map(|k| centre[j] - half[j] + 2.0 * half[j] * k as f64 / (points - 1) as f64)
                .collect()
        })
        .collect();
    let total = points.pow(n as u32);
    let logs: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut r = flat;
            let x: Vec<f64> = (0..n)
                .map(|j| {
                    let k = r % points;
                    r /= points;
                    axes[j][k]
                })
                .collect();
            log_joint(&x)
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut marg = vec![vec![0.0; points]; n];
    for (flat, l) in logs.iter().enumerate() {
        let w = (l - top).exp();
        let mut r = flat;
        for m in marg.iter_mut() {
            m[r % points] += w;
            r /= points;
        }
    }
    let mut marginals = Vec::with_capacity(n);
    let mut mean = Vec::with_capacity(n);
    let mut sd = Vec::with_capacity(n);
    for (ax, d) in axes.into_iter().zip(marg) {
        let m = Marginal::new(ax, d)?;
        let mu = m.emarginal(|t| t);
        mean.push(mu);
        sd.push(m.emarginal(|t| (t - mu).powi(2)).sqrt());
        marginals.push(m);
    }
    Ok(GridPosterior {
        marginals,
        mean,
        sd,
    })
}

fn dense_mode(f: &impl Fn(&[f64]) -> f64, n: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let h = 1e-4;
    let grad_hess = |x: &[f64]| {
        let f0 = f(x);
        let mut g = DVector::zeros(n);
        let mut hm = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut a = x.to_vec();
            a[i] += h;
            let mut b = x.to_vec();
            b[i] -= h;
            let (fa, fb) = (f(&a), f(&b));
            g[i] = (fa - fb) / (2.0 * h);
            hm[(i, i)] = -(fa - 2.0 * f0 + fb) / (h * h);
            for j in 0..i {
                let t = |di: f64, dj: f64| {
                    let mut c = x.to_vec();
                    c[i] += di;
                    c[j] += dj;
                    f(&c)
                };
                let v = -(t(h, h) - t(h, -h) - t(-h, h) + t(-h, -h)) / (4.0 * h * h);
                hm[(i, j)] = v;
                hm[(j, i)] = v;
            }
        }
        (g, hm)
    };
    let mut x = vec![0.0; n];
    for _ in 0..200 {
        let (g, hm) = grad_hess(&x);
        let step = hm
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { pivot: 0 })?
            .solve(&g);
        let mut t = 1.0;
        let f0 = f(&x);
        let next = loop {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if f(&cand) >= f0 || t < 1e-6 {
                break cand;
            }
            t *= 0.5;
        };
        let moved = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if moved < 1e-10 {
            break;
        }
    }
    let (_, hm) = grad_hess(&x);
    Ok((x, hm))
}

/// Output of [`metropolis_lgm`]: the latent field followed by the free
/// hyperparameters on the internal scale.
#[derive(Debug, Clone)]
pub struct Chains {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Monte Carlo standard error by batch means.
    pub mcse: Vec<f64>,
    /// Final acceptance rate per coordinate, averaged over chains.
    pub acceptance: Vec<f64>,
    /// Retained draws of all chains, one row per draw.
    pub draws: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct MetropolisOptions {
    pub n_iter: usize,
    /// Adaptation happens only during burn-in.
    pub burn_in: usize,
    pub chains: usize,
    /// At most this many draws are kept per chain.
    pub max_kept: usize,
    pub seed: u64,
}

impl MetropolisOptions {
    pub fn new(n_iter: usize, seed: u64) -> Self {
        Self {
            n_iter,
            burn_in: n_iter / 4,
            chains: 2,
            max_kept: 20_000,
            seed,
        }
    }
}

/// Componentwise adaptive random-walk Metropolis on `(x, θ)`.
pub fn metropolis_lgm(
    spec: &ModelSpec,
    data: &DataTable,
    n_iter: usize,
    seed: u64,
) -> Result<Chains> {
    let model = LatentModel::new(spec, data)?;
    metropolis_model(&model, &MetropolisOptions::new(n_iter, seed))
}

/// Column lists of a symmetric matrix with both triangles.
fn neighbours(q: &SparseSym) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![Vec::new(); q.n()];
    for (i, j, v) in q.iter() {
        out[j].push((i, v));
        if i != j {
            out[i].push((j, v));
        }
    }
    out
}

struct State<'a> {
    model: &'a LatentModel,
    x: Vec<f64>,
    theta: Vec<f64>,
    eta: Vec<f64>,
    fam: Vec<f64>,
    q: Vec<Vec<(usize, f64)>>,
    qx: Vec<f64>,
    ld: f64,
    /// Observations touched by each latent element, with the coefficient.
    cols: &'a [Vec<(usize, f64)>],
}

impl<'a> State<'a> {
    fn new(model: &'a LatentModel, cols: &'a [Vec<(usize, f64)>], theta: Vec<f64>) -> Result<Self> {
        let n = model.n_latent();
        let hv = model.hyper_values(&theta);
        let (qt, ld) = model.prior_precision(&hv);
        let q = SparseSym::from_triplets(n, &qt)?;
        Ok(Self {
            model,
            x: vec![0.0; n],
            eta: vec![0.0; model.n_obs()],
            fam: hv.family,
            qx: vec![0.0; n],
            q: neighbours(&q),
            ld,
            theta,
            cols,
        })
    }

    fn obs_loglik(&self, i: usize, eta: f64, fam: &[f64]) -> f64 {
        let y = self.model.asm.y[i];
        if y.is_nan() {
            0.0
        } else {
            self.model.family.loglik(y, eta, fam, self.model.asm.aux[i])
        }
    }

    fn update_latent(&mut self, j: usize, sd: f64, rng: &mut ChaCha8Rng) -> bool {
        let d: f64 = sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let qjj = self.q[j].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1);
        let mut delta = -(d * self.qx[j] + 0.5 * d * d * qjj);
        for &(i, a) in &self.cols[j] {
            delta += self.obs_loglik(i, self.eta[i] + a * d, &self.fam)
                - self.obs_loglik(i, self.eta[i], &self.fam);
        }
        if rng.gen::<f64>().ln() < delta {
            self.x[j] += d;
            for &(i, a) in &self.cols[j] {
                self.eta[i] += a * d;
            }
            for &(k, v) in &self.q[j] {
                self.qx[k] += v * d;
            }
            true
        } else {
            false
        }
    }

    fn log_theta_target(
        &self,
        theta: &[f64],
    ) -> Option<(f64, Vec<f64>, Vec<Vec<(usize, f64)>>, Vec<f64>, f64)> {
        if !self.model.theta_in_domain(theta) {
            return None;
        }
        let n = self.model.n_latent();
        let hv = self.model.hyper_values(theta);
        let (qt, ld) = self.model.prior_precision(&hv);
        let q = SparseSym::from_triplets(n, &qt).ok()?;
        let qx = q.mul_vec(&self.x);
        let quad: f64 = qx.iter().zip(&self.x).map(|(a, b)| a * b).sum();
        let ll: f64 = if hv.family.is_empty() {
            0.0
        } else {
            (0..self.model.n_obs())
                .map(|i| self.obs_loglik(i, self.eta[i], &hv.family))
                .sum()
        };
        let lp = self.model.log_prior(theta) + 0.5 * ld - 0.5 * quad + ll;
        lp.is_finite()
            .then(|| (lp, hv.family, neighbours(&q), qx, ld))
    }

    fn update_theta(&mut self, k: usize, sd: f64, rng: &mut ChaCha8Rng) -> bool {
        let d: f64 = sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let mut prop = self.theta.clone();
        prop[k] += d;
        let Some(cur) = self.log_theta_target(&self.theta) else {
            return false;
        };
        let Some((lp, fam, q, qx, ld)) = self.log_theta_target(&prop) else {
            return false;
        };
        if rng.gen::<f64>().ln() < lp - cur.0 {
            self.theta = prop;
            self.fam = fam;
            self.q = q;
            self.qx = qx;
            self.ld = ld;
            true
        } else {
            false
        }
    }
}

pub fn metropolis_model(model: &LatentModel, opt: &MetropolisOptions) -> Result<Chains> {
    if !model.constraints().is_empty() {
        return Err(Error::Domain(
            "the Metropolis oracle does not support linear constraints".into(),
        ));
    }
    let n = model.n_latent();
    let p = model.n_theta();
    let mut cols = vec![Vec::new(); n];
    for i in 0..model.n_obs() {
        for &(j, a) in model.row(i) {
            if a != 0.0 {
                cols[j].push((i, a));
            }
        }
    }
    let dim = n + p;
    let thin = (opt.n_iter.saturating_sub(opt.burn_in) / opt.max_kept.max(1)).max(1);

    let runs: Vec<Result<(Vec<Vec<f64>>, Vec<f64>)>> = (0..opt.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
            rng.set_stream(c as u64);
            let mut st = State::new(model, &cols, model.initial_theta())?;
            let mut log_sd = vec![(0.1f64).ln(); dim];
            let mut acc = vec![0usize; dim];
            let mut acc_window = vec![0usize; dim];
            let mut kept = Vec::new();
            let window = 50;
            for it in 0..opt.n_iter {
                for j in 0..n {
                    if st.update_latent(j, log_sd[j].exp(), &mut rng) {
                        acc_window[j] += 1;
                        if it >= opt.burn_in {
                            acc[j] += 1;
                        }
                    }
                }
                for k in 0..p {
                    if st.update_theta(k, log_sd[n + k].exp(), &mut rng) {
                        acc_window[n + k] += 1;
                        if it >= opt.burn_in {
                            acc[n + k] += 1;
                        }
                    }
                }
                if it < opt.burn_in && (it + 1) % window == 0 {
                    let batch = ((it + 1) / window) as f64;
                    let step = (1.0 / batch.sqrt()).min(0.1);
                    for (ls, a) in log_sd.iter_mut().zip(acc_window.iter_mut()) {
                        let rate = *a as f64 / window as f64;
                        *ls += if rate > 0.44 { step } else { -step };
                        *a = 0;
                    }
                } else if (it + 1) % window == 0 {
                    acc_window.iter_mut().for_each(|a| *a = 0);
                }
                if it >= opt.burn_in && (it - opt.burn_in) % thin == 0 {
                    let mut row = st.x.clone();
                    row.extend(&st.theta);
                    kept.push(row);
                }
            }
            let post = opt.n_iter.saturating_sub(opt.burn_in).max(1) as f64;
            Ok((kept, acc.iter().map(|&a| a as f64 / post).collect()))
        })
        .collect();

    let mut draws = Vec::new();
    let mut acceptance = vec![0.0; dim];
    let mut chains = Vec::new();
    for r in runs {
        let (k, a) = r?;
        acceptance
            .iter_mut()
            .zip(&a)
            .for_each(|(s, v)| *s += v / opt.chains as f64);
        chains.push(k);
    }
    let mut mean = vec![0.0; dim];
    let mut sd = vec![0.0; dim];
    let mut mcse = vec![0.0; dim];
    let total: usize = chains.iter().map(Vec::len).sum();
    if total > 1 {
        for d in 0..dim {
            let all = chains.iter().flatten().map(|r| r[d]);
            let m = all.clone().sum::<f64>() / total as f64;
            let v = all.map(|x| (x - m).powi(2)).sum::<f64>() / (total - 1) as f64;
            mean[d] = m;
            sd[d] = v.sqrt();
            // batch means within each chain
            let mut bm = Vec::new();
            for ch in &chains {
                let b = (ch.len() as f64).sqrt().floor().max(1.0) as usize;
                for batch in ch.chunks(b).filter(|c| c.len() == b) {
                    bm.push(batch.iter().map(|r| r[d]).sum::<f64>() / b as f64);
                }
            }
            if bm.len() > 1 {
                let bmean = bm.iter().sum::<f64>() / bm.len() as f64;
                let bvar =
                    bm.iter().map(|x| (x - bmean).powi(2)).sum::<f64>() / (bm.len() - 1) as f64;
                mcse[d] = (bvar / bm.len() as f64).sqrt();
            }
        }
    }
    for ch in chains {
        draws.extend(ch);
    }
    let layout = &model.asm.layout;
    let mut names: Vec<String> = layout.fixed_names.clone();
    for b in &layout.components {
        names.extend((1..=b.len).map(|k| format!("{}:{k}", b.name)));
    }
    names.extend(model.free_hypers().map(|h| h.name.clone()));
    Ok(Chains {
        names,
        mean,
        sd,
        mcse,
        acceptance,
        draws,
    })
}
