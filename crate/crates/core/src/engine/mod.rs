//! Nested Laplace inference: a Gaussian approximation of the latent field at
//! each θ, a Laplace approximation of `θ | y`, and integration over a grid.

pub mod diagnostics;
mod fit;
mod grid;
mod laplace;
mod mode;
mod model;
pub mod posterior;

pub use diagnostics::{Cpo, Diagnostics, Dic, Waic};
pub use fit::{fit, fit_model, FitResult, Marginals, RandomSummary};
pub use grid::{build_grid, GridOptions, GridPoint, ThetaGrid};
pub use laplace::{gaussian_approximation, log_posterior_theta, GaussianApprox, Settings};
pub use mode::{find_mode, floor_spd, gradient, neg_hessian, ModeOptions, ModeResult, Objective};
pub use model::{HyperParam, HyperValues, LatentModel, Owner};
pub use posterior::{Config, GaussMixture, PointFit, SummaryRow};
