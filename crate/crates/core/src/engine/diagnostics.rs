//! Marginal likelihood and predictive model-comparison criteria.

use serde::Serialize;

use crate::util::{log_sum_exp, normal_quadrature};

use super::grid::ThetaGrid;
use super::model::LatentModel;
use super::posterior::PointFit;

const QUAD_NODES: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dic {
    pub dic: f64,
    /// Effective number of parameters `E[D] − D(E[η])`.
    pub p_eff: f64,
    pub mean_deviance: f64,
    pub deviance_of_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Waic {
    pub waic: f64,
    pub p_eff: f64,
    pub lppd: f64,
}

/// Conditional predictive ordinate of one observation. Missing responses have none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cpo {
    pub cpo: Option<f64>,
    /// Set when `E[1/p(y_i | η_i)]` overflowed or was dominated by the far tail.
    pub failure: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub mlik: Option<f64>,
    pub dic: Option<Dic>,
    pub waic: Option<Waic>,
    pub cpo: Option<Vec<Cpo>>,
}

/// Log marginal likelihood: a Riemann sum over the tensor grid, otherwise the
/// Laplace approximation at the mode.
pub fn mlik<T>(grid: &ThetaGrid<T>) -> f64 {
    let p = grid.dim();
    if p == 0 {
        return grid.points[0].log_post;
    }
    if grid.is_tensor() {
        let lp: Vec<f64> = grid.points.iter().map(|q| q.log_post).collect();
        log_sum_exp(&lp) + grid.log_cell_volume()
    } else {
        let lp0 = grid.mode_point().log_post;
        lp0 + 0.5 * p as f64 * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * grid.eigenvalues.iter().map(|l| l.ln()).sum::<f64>()
    }
}

/// `log p(y_i | η)` at the quadrature nodes of every grid component, with the
/// weight `w_k · ω_q` of each node.
fn node_logliks(model: &LatentModel, grid: &ThetaGrid<PointFit>, i: usize) -> Vec<(f64, f64)> {
    let (t, w) = normal_quadrature(QUAD_NODES);
    let y = model.asm.y[i];
    let aux = model.asm.aux[i];
    let mut out = Vec::with_capacity(grid.points.len() * QUAD_NODES);
    for p in &grid.points {
        let m = p.payload.eta_mean[i];
        let s = p.payload.eta_var[i].sqrt();
        for (&tq, &wq) in t.iter().zip(&w) {
            let ll = model
                .family
                .loglik(y, m + s * tq, &p.payload.family_theta, aux);
            out.push((p.weight * wq, ll));
        }
    }
    out
}

pub fn dic(model: &LatentModel, grid: &ThetaGrid<PointFit>) -> Dic {
    let modal = &grid.mode_point().payload.family_theta;
    let mut mean_dev = 0.0;
    let mut dev_mean = 0.0;
    for i in (0..model.n_obs()).filter(|&i| !model.asm.y[i].is_nan()) {
        let nodes = node_logliks(model, grid, i);
        mean_dev += -2.0 * nodes.iter().map(|(w, ll)| w * ll).sum::<f64>();
        let eta_bar: f64 = grid
            .points
            .iter()
            .map(|p| p.weight * p.payload.eta_mean[i])
            .sum();
        dev_mean += -2.0
            * model
                .family
                .loglik(model.asm.y[i], eta_bar, modal, model.asm.aux[i]);
    }
    Dic {
        dic: 2.0 * mean_dev - dev_mean,
        p_eff: mean_dev - dev_mean,
        mean_deviance: mean_dev,
        deviance_of_mean: dev_mean,
    }
}

pub fn waic(model: &LatentModel, grid: &ThetaGrid<PointFit>) -> Waic {
    let mut lppd = 0.0;
    let mut p_eff = 0.0;
    for i in (0..model.n_obs()).filter(|&i| !model.asm.y[i].is_nan()) {
        let nodes = node_logliks(model, grid, i);
        let terms: Vec<f64> = nodes.iter().map(|(w, ll)| w.ln() + ll).collect();
        lppd += log_sum_exp(&terms);
        let m1: f64 = nodes.iter().map(|(w, ll)| w * ll).sum();
        let m2: f64 = nodes.iter().map(|(w, ll)| w * ll * ll).sum();
        p_eff += (m2 - m1 * m1).max(0.0);
    }
    Waic {
        waic: -2.0 * (lppd - p_eff),
        p_eff,
        lppd,
    }
}

pub fn cpo(model: &LatentModel, grid: &ThetaGrid<PointFit>) -> Vec<Cpo> {
    (0..model.n_obs())
        .map(|i| {
            if model.asm.y[i].is_nan() {
                return Cpo {
                    cpo: None,
                    failure: false,
                };
            }
            let nodes = node_logliks(model, grid, i);
            let terms: Vec<f64> = nodes.iter().map(|(w, ll)| w.ln() - ll).collect();
            let log_inv = log_sum_exp(&terms);
            // a single node carrying most of E[1/p] means the quadrature is unreliable
            let biggest = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let failure = !log_inv.is_finite()
                || log_inv > 700.0
                || biggest - log_inv > -0.01 && nodes.len() > 1;
            let cpo = (-log_inv).exp();
            Cpo {
                cpo: cpo.is_finite().then_some(cpo),
                failure,
            }
        })
        .collect()
}
