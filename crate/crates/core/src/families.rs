//! Observation models: log-densities and their derivatives in the linear predictor.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::util::{expit, softplus};

/// Lower bound applied to the negative second derivative so working precisions stay SPD.
pub const DEFAULT_CURVATURE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Gaussian,
    Poisson,
    Binomial,
    Nbinomial,
    Gamma,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Log,
    Logit,
}

/// Per-observation auxiliary data: Poisson exposure `E` and binomial trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aux {
    pub e: f64,
    pub ntrials: f64,
}

impl Default for Aux {
    fn default() -> Self {
        Self {
            e: 1.0,
            ntrials: 1.0,
        }
    }
}

impl Link {
    pub fn link(self, mu: f64) -> Result<f64> {
        match self {
            Link::Identity => Ok(mu),
            Link::Log if mu > 0.0 => Ok(mu.ln()),
            Link::Logit if mu > 0.0 && mu < 1.0 => Ok((mu / (1.0 - mu)).ln()),
            _ => Err(Error::Domain(format!(
                "{mu} is outside the domain of the {self:?} link"
            ))),
        }
    }

    pub fn inv_link(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
            Link::Logit => expit(eta),
        }
    }
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Poisson => "poisson",
            Family::Binomial => "binomial",
            Family::Nbinomial => "nbinomial",
            Family::Gamma => "gamma",
            Family::Beta => "beta",
        }
    }

    pub fn link(self) -> Link {
        match self {
            Family::Gaussian => Link::Identity,
            Family::Poisson | Family::Nbinomial | Family::Gamma => Link::Log,
            Family::Binomial | Family::Beta => Link::Logit,
        }
    }

    /// Names of the likelihood hyperparameters, each on the log scale internally.
    pub fn hyper_names(self) -> &'static [&'static str] {
        match self {
            Family::Gaussian => &["prec"],
            Family::Nbinomial => &["size"],
            Family::Gamma | Family::Beta => &["prec"],
            Family::Poisson | Family::Binomial => &[],
        }
    }

    /// Display label of the likelihood hyperparameter in summaries.
    pub fn hyper_label(self) -> Option<&'static str> {
        match self {
            Family::Gaussian => Some("Precision for the Gaussian observations"),
            Family::Nbinomial => Some("size for the nbinomial observations"),
            Family::Gamma => Some("Precision parameter for the Gamma observations"),
            Family::Beta => Some("precision parameter for the beta observations"),
            Family::Poisson | Family::Binomial => None,
        }
    }

    /// True when the log-likelihood is exactly quadratic in `η` (one Newton step suffices).
    pub fn is_quadratic(self) -> bool {
        self == Family::Gaussian
    }

    /// Checks that `y` lies in the support of the family.
    pub fn check(self, y: f64, aux: Aux) -> Result<()> {
        let ok = match self {
            Family::Gaussian => y.is_finite(),
            Family::Poisson | Family::Nbinomial => y >= 0.0 && y.fract() == 0.0,
            Family::Binomial => {
                y >= 0.0 && y.fract() == 0.0 && aux.ntrials.fract() == 0.0 && y <= aux.ntrials
            }
            Family::Gamma => y > 0.0,
            Family::Beta => y > 0.0 && y < 1.0,
        };
        if !ok {
            return Err(Error::Data(format!(
                "response {y} is outside the support of the {} family",
                self.name()
            )));
        }
        if self == Family::Poisson && !(aux.e > 0.0) {
            return Err(Error::Data(format!(
                "expected count E = {} must be positive",
                aux.e
            )));
        }
        if self == Family::Binomial && !(aux.ntrials >= 1.0) {
            return Err(Error::Data(format!(
                "Ntrials = {} must be at least 1",
                aux.ntrials
            )));
        }
        Ok(())
    }

    /// The part of the log-density that depends on `η`.
    pub fn log_kernel(self, y: f64, eta: f64, theta: &[f64], aux: Aux) -> f64 {
        match self {
            Family::Gaussian => {
                let tau = theta[0].exp();
                -0.5 * tau * (y - eta).powi(2)
            }
            Family::Poisson => y * eta - aux.e * eta.exp(),
            Family::Binomial => y * eta - aux.ntrials * softplus(eta),
            Family::Nbinomial => {
                let size = theta[0].exp();
                // log(size + μ) = log size + softplus(η − log size)
                y * eta - (y + size) * (size.ln() + softplus(eta - size.ln()))
            }
            Family::Gamma => {
                let shape = theta[0].exp();
                -shape * eta - shape * y * (-eta).exp()
            }
            Family::Beta => {
                let phi = theta[0].exp();
                let mu = expit(eta);
                let (a, b) = (mu * phi, (1.0 - mu) * phi);
                -ln_gamma(a) - ln_gamma(b) + a * y.ln() + b * (-y).ln_1p()
            }
        }
    }

    /// The `η`-free remainder, so that `loglik = log_kernel + log_norm_const`.
    pub fn log_norm_const(self, y: f64, theta: &[f64], aux: Aux) -> f64 {
        match self {
            Family::Gaussian => 0.5 * theta[0] - 0.5 * (2.0 * std::f64::consts::PI).ln(),
            Family::Poisson => y * aux.e.ln() - ln_gamma(y + 1.0),
            Family::Binomial => {
                ln_gamma(aux.ntrials + 1.0) - ln_gamma(y + 1.0) - ln_gamma(aux.ntrials - y + 1.0)
            }
            Family::Nbinomial => {
                let size = theta[0].exp();
                ln_gamma(y + size) - ln_gamma(size) - ln_gamma(y + 1.0) + size * size.ln()
            }
            Family::Gamma => {
                let shape = theta[0].exp();
                shape * shape.ln() + (shape - 1.0) * y.ln() - ln_gamma(shape)
            }
            Family::Beta => {
                let phi = theta[0].exp();
                ln_gamma(phi) - y.ln() - (-y).ln_1p()
            }
        }
    }

    /// Log-density of one observation.
    pub fn loglik(self, y: f64, eta: f64, theta: &[f64], aux: Aux) -> f64 {
        self.log_kernel(y, eta, theta, aux) + self.log_norm_const(y, theta, aux)
    }

    /// [`Family::loglik`] with a support check.
    pub fn loglik_checked(self, y: f64, eta: f64, theta: &[f64], aux: Aux) -> Result<f64> {
        self.check(y, aux)?;
        Ok(self.loglik(y, eta, theta, aux))
    }

    /// Gradient `∂ℓ/∂η` and curvature `−∂²ℓ/∂η²` (unclamped).
    pub fn derivs(self, y: f64, eta: f64, theta: &[f64], aux: Aux) -> (f64, f64) {
        match self {
            Family::Gaussian => {
                let tau = theta[0].exp();
                (tau * (y - eta), tau)
            }
            Family::Poisson => {
                let mu = aux.e * eta.exp();
                (y - mu, mu)
            }
            Family::Binomial => {
                let p = expit(eta);
                (y - aux.ntrials * p, aux.ntrials * p * (1.0 - p))
            }
            Family::Nbinomial => {
                let size = theta[0].exp();
                // μ / (size + μ) computed stably
                let r = expit(eta - size.ln());
                let g = y - (y + size) * r;
                let h = (y + size) * r * (1.0 - r);
                (g, h)
            }
            Family::Gamma => {
                let shape = theta[0].exp();
                let t = shape * y * (-eta).exp();
                (-shape + t, t)
            }
            Family::Beta => {
                let phi = theta[0].exp();
                let mu = expit(eta);
                let v = mu * (1.0 - mu);
                let (a, b) = (mu * phi, (1.0 - mu) * phi);
                let s = y.ln() - (-y).ln_1p() - digamma(a) + digamma(b);
                let g = phi * v * s;
                let h = -phi * v * (1.0 - 2.0 * mu) * s
                    + phi * phi * v * v * (trigamma(a) + trigamma(b));
                (g, h)
            }
        }
    }

    /// Gradient and curvature with the curvature floored at `floor`.
    pub fn working(self, y: f64, eta: f64, theta: &[f64], aux: Aux, floor: f64) -> (f64, f64) {
        let (g, h) = self.derivs(y, eta, theta, aux);
        (g, h.max(floor))
    }
}

/// `ψ′(x)` for `x > 0`, by recurrence to `x ≥ 10` then the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + x2 / 2.0
        + (1.0 / x)
            * x2
            * (1.0 / 6.0
                - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0 - x2 * 5.0 / 66.0))))
}
