//! The full pipeline from a model and data to posterior summaries.

use serde::Serialize;

use crate::data::DataTable;
use crate::error::{Error, Result};
use crate::marginals::Marginal;
use crate::spec::ModelSpec;

use super::diagnostics::{self, Diagnostics};
use super::grid::{build_grid, GridOptions, ThetaGrid};
use super::laplace::{gaussian_approximation, GaussianApprox, Settings};
use super::mode::{find_mode, ModeOptions, ModeResult};
use super::model::LatentModel;
use super::posterior::{
    fitted_summaries, hyper_internal_marginal, hyper_summary, latent_summaries, Config, PointFit,
    SummaryRow,
};

/// Summaries of one random component.
#[derive(Debug, Clone, Serialize)]
pub struct RandomSummary {
    pub id: String,
    /// Rows named by the 1-based position in the block.
    pub rows: Vec<SummaryRow>,
}

/// Stored marginals, each paired with its summary name.
#[derive(Debug, Clone, Default)]
pub struct Marginals {
    pub fixed: Vec<(String, Marginal)>,
    /// Per component id, one marginal per block element. Empty unless requested.
    pub random: Vec<(String, Vec<Marginal>)>,
    /// Natural scale.
    pub hyperpar: Vec<(String, Marginal)>,
    /// Internal scale, in θ order.
    pub hyperpar_internal: Vec<Marginal>,
    /// Linear predictor scale. Empty unless requested.
    pub fitted: Vec<Marginal>,
}

#[derive(Debug)]
pub struct FitResult {
    pub model: LatentModel,
    pub summary_fixed: Vec<SummaryRow>,
    pub summary_random: Vec<RandomSummary>,
    pub summary_hyperpar: Vec<SummaryRow>,
    pub summary_fitted: Vec<SummaryRow>,
    pub marginals: Marginals,
    pub diagnostics: Diagnostics,
    pub mode: ModeResult,
    pub grid: ThetaGrid<PointFit>,
    /// Settings of the successful attempt.
    pub settings: Settings,
    /// Whether the conservative retry was needed.
    pub used_safe_mode: bool,
}

impl FitResult {
    /// Whether joint configurations were stored for sampling.
    pub fn has_config(&self) -> bool {
        self.grid.points.iter().all(|p| p.payload.config.is_some())
    }
}

/// Options for one attempt.
#[derive(Debug, Clone, Copy)]
struct Attempt {
    settings: Settings,
    mode: ModeOptions,
    from_prior_median: bool,
}

/// Fits `spec` to `data`.
pub fn fit(spec: &ModelSpec, data: &DataTable) -> Result<FitResult> {
    let model = LatentModel::new(spec, data)?;
    fit_model(model)
}

/// Fits an already assembled model.
pub fn fit_model(model: LatentModel) -> Result<FitResult> {
    let inla = &model.spec.control.inla;
    let mode = ModeOptions {
        grad_step: inla.grad_step,
        hess_step: inla.hess_step,
        max_iter: inla.max_iter,
        ..ModeOptions::default()
    };
    let first = Attempt {
        settings: Settings::default(),
        mode,
        from_prior_median: false,
    };
    match run(&model, &first) {
        Ok(parts) => finish(model, parts, first.settings, false),
        Err(e) if !model.spec.safe => Err(e),
        Err(_) => {
            let safe = Attempt {
                settings: Settings::safe(),
                mode: ModeOptions {
                    max_step: mode.max_step * 0.5,
                    ..mode
                },
                from_prior_median: true,
            };
            let parts = run(&model, &safe)?;
            finish(model, parts, safe.settings, true)
        }
    }
}

fn failed(stage: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        e @ Error::FitFailed { .. } => e,
        e => Error::FitFailed {
            stage: stage.into(),
            message: e.to_string(),
        },
    }
}

fn point_fit(model: &LatentModel, g: GaussianApprox, keep_config: bool) -> PointFit {
    let (eta_mean, eta_var) = g.eta_moments(model);
    PointFit {
        family_theta: model.hyper_values(&g.theta).family,
        config: keep_config.then(|| Config {
            factor: g.factor,
            correction: g.correction,
        }),
        x_mode: g.x_mode,
        diag_var: g.diag_var,
        eta_mean,
        eta_var,
    }
}

fn run(model: &LatentModel, a: &Attempt) -> Result<(ModeResult, ThetaGrid<PointFit>)> {
    let s = &a.settings;
    let start = if a.from_prior_median {
        model.prior_median_theta()
    } else {
        model.initial_theta()
    };
    // every evaluation starts Newton from the same latent vector, so that
    // results do not depend on evaluation order
    let x_ref = gaussian_approximation(model, &start, None, s)
        .map_err(failed("gaussian approximation at the initial θ"))?
        .x_mode;
    let objective =
        |t: &[f64]| gaussian_approximation(model, t, Some(&x_ref), s).map(|g| g.log_post);
    let mode = find_mode(&objective, &start, &a.mode).map_err(failed("mode search"))?;

    let x_star = gaussian_approximation(model, &mode.theta, Some(&x_ref), s)
        .map_err(failed("gaussian approximation at the mode"))?
        .x_mode;
    let inla = &model.spec.control.inla;
    let opts = GridOptions {
        dz: inla.dz,
        diff_logdens: inla.diff_logdens,
        ..GridOptions::default()
    };
    let keep = model.spec.control.compute.config;
    let grid = build_grid(&mode.theta, &mode.hessian, &opts, |t: &[f64]| {
        let g = gaussian_approximation(model, t, Some(&x_star), s)?;
        Ok((g.log_post, point_fit(model, g, keep)))
    })
    .map_err(failed("grid exploration"))?;
    Ok((mode, grid))
}

fn finish(
    model: LatentModel,
    (mode, grid): (ModeResult, ThetaGrid<PointFit>),
    settings: Settings,
    used_safe_mode: bool,
) -> Result<FitResult> {
    let compute = model.spec.control.compute.clone();
    let layout = &model.asm.layout;
    let stage = failed("posterior summaries");

    let fixed = latent_summaries(&grid, layout.fixed.range(), |j| {
        layout.fixed_names[j - layout.fixed.offset].clone()
    })
    .map_err(&stage)?;

    let mut summary_random = Vec::new();
    let mut random_marginals = Vec::new();
    for b in &layout.components {
        let rows = latent_summaries(&grid, b.range(), |j| (j - b.offset + 1).to_string())
            .map_err(&stage)?;
        let (rows, margs): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        summary_random.push(RandomSummary {
            id: b.name.clone(),
            rows,
        });
        if compute.return_marginals {
            random_marginals.push((b.name.clone(), margs));
        }
    }

    let mut summary_hyperpar = Vec::new();
    let mut hyper_nat = Vec::new();
    let mut hyper_int = Vec::new();
    for (j, h) in model.free_hypers().enumerate() {
        let internal = hyper_internal_marginal(&grid, j).map_err(&stage)?;
        let (row, natural) =
            hyper_summary(h.label.clone(), &internal, h.transform()).map_err(&stage)?;
        hyper_nat.push((h.label.clone(), natural));
        hyper_int.push(internal);
        summary_hyperpar.push(row);
    }

    let fitted = fitted_summaries(&grid, model.n_obs()).map_err(&stage)?;
    let (summary_fitted, fitted_margs): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();

    let diagnostics = Diagnostics {
        mlik: compute.mlik.then(|| diagnostics::mlik(&grid)),
        dic: compute.dic.then(|| diagnostics::dic(&model, &grid)),
        waic: compute.waic.then(|| diagnostics::waic(&model, &grid)),
        cpo: compute.cpo.then(|| diagnostics::cpo(&model, &grid)),
    };

    let (summary_fixed, fixed_margs): (Vec<_>, Vec<_>) = fixed.into_iter().unzip();
    let marginals = Marginals {
        fixed: summary_fixed
            .iter()
            .map(|r| r.name.clone())
            .zip(fixed_margs)
            .collect(),
        random: random_marginals,
        hyperpar: hyper_nat,
        hyperpar_internal: hyper_int,
        fitted: if compute.return_marginals {
            fitted_margs
        } else {
            Vec::new()
        },
    };
    Ok(FitResult {
        model,
        summary_fixed,
        summary_random,
        summary_hyperpar,
        summary_fitted,
        marginals,
        diagnostics,
        mode,
        grid,
        settings,
        used_safe_mode,
    })
}
