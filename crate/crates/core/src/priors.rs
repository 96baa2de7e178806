//! Hyperprior densities on the internal (unconstrained) scale.
//!
//! Every hyperparameter is carried internally as an unconstrained real `θ`
//! together with a [`Transform`] back to its natural domain. A [`Prior`] is a
//! [`PriorSpec`] bound to a transform; its log-density already includes the
//! Jacobian of the transform, so it integrates to one over `θ`.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::util::{expit, softplus};

/// Map between a hyperparameter's natural domain and the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// `θ = log τ` for a precision or dispersion `τ > 0`.
    LogPrecision,
    /// `θ = log((1 + ρ)/(1 − ρ))` for a correlation `|ρ| < 1`.
    Fisher,
    /// `θ = log(φ/(1 − φ))` for a proportion `φ ∈ (0, 1)`.
    Logit,
    Identity,
}

impl Transform {
    pub fn to_internal(self, v: f64) -> Result<f64> {
        let ok = match self {
            Transform::LogPrecision => v > 0.0,
            Transform::Fisher => v > -1.0 && v < 1.0,
            Transform::Logit => v > 0.0 && v < 1.0,
            Transform::Identity => v.is_finite(),
        };
        if !ok {
            return Err(Error::Domain(format!(
                "{v} is outside the domain of the {self:?} transform"
            )));
        }
        Ok(match self {
            Transform::LogPrecision => v.ln(),
            Transform::Fisher => ((1.0 + v) / (1.0 - v)).ln(),
            Transform::Logit => (v / (1.0 - v)).ln(),
            Transform::Identity => v,
        })
    }

    pub fn from_internal(self, theta: f64) -> f64 {
        match self {
            Transform::LogPrecision => theta.exp(),
            Transform::Fisher => (theta / 2.0).tanh(),
            Transform::Logit => expit(theta),
            Transform::Identity => theta,
        }
    }

    /// `d(natural)/dθ`.
    pub fn derivative(self, theta: f64) -> f64 {
        match self {
            Transform::LogPrecision => theta.exp(),
            Transform::Fisher => 2.0 * expit(theta) * expit(-theta),
            Transform::Logit => expit(theta) * expit(-theta),
            Transform::Identity => 1.0,
        }
    }
}

/// A prior as written in a model file: a family name and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// `P(σ > u) = alpha` with `σ = τ^{-1/2}`.
    PcPrec {
        u: f64,
        alpha: f64,
    },
    /// `P(ρ > u) = alpha`, shrinking toward `ρ = 1`.
    PcCor1 {
        u: f64,
        alpha: f64,
    },
    /// `P(|ρ| > u) = alpha`, shrinking toward `ρ = 0`.
    PcCor0 {
        u: f64,
        alpha: f64,
    },
    /// Mixing proportion of a bym2 component: `P(φ < u) = alpha`.
    Pc {
        u: f64,
        alpha: f64,
    },
    /// `τ ~ Gamma(shape a, rate b)`.
    LogGamma {
        a: f64,
        b: f64,
    },
    /// Normal with mean and precision, directly on `θ`.
    Gaussian {
        mean: f64,
        prec: f64,
    },
    Flat,
    /// Log-density values `logd` at strictly increasing `θ` nodes `x`.
    Table {
        x: Vec<f64>,
        logd: Vec<f64>,
    },
}

impl PriorSpec {
    /// Builds a prior from its model-file name and parameter list.
    ///
    /// A name of the form `"table: x1 … xk y1 … yk"` carries its grid inline.
    pub fn parse(name: &str, param: &[f64]) -> std::result::Result<Self, String> {
        let name = name.trim();
        if let Some(rest) = name.strip_prefix("table:") {
            let values = rest
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| format!("bad number `{s}` in table prior"))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            return Self::table(&values);
        }
        let two = |what: &str| -> std::result::Result<(f64, f64), String> {
            match param {
                [a, b] => Ok((*a, *b)),
                _ => Err(format!(
                    "prior `{name}` takes two parameters ({what}), got {}",
                    param.len()
                )),
            }
        };
        let pc = |what| -> std::result::Result<(f64, f64), String> {
            let (u, alpha) = two(what)?;
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(format!("prior `{name}` needs alpha in (0, 1), got {alpha}"));
            }
            Ok((u, alpha))
        };
        let spec = match name {
            "pc.prec" => {
                let (u, alpha) = pc("U, alpha")?;
                if !(u > 0.0) {
                    return Err(format!("pc.prec needs U > 0, got {u}"));
                }
                PriorSpec::PcPrec { u, alpha }
            }
            "pc.cor1" => {
                let (u, alpha) = pc("U, alpha")?;
                if !(u > -1.0 && u < 1.0) {
                    return Err(format!("pc.cor1 needs U in (-1, 1), got {u}"));
                }
                PriorSpec::PcCor1 { u, alpha }
            }
            "pc.cor0" => {
                let (u, alpha) = pc("U, alpha")?;
                if !(u > 0.0 && u < 1.0) {
                    return Err(format!("pc.cor0 needs U in (0, 1), got {u}"));
                }
                PriorSpec::PcCor0 { u, alpha }
            }
            "pc" => {
                let (u, alpha) = pc("U, alpha")?;
                if !(u > 0.0 && u < 1.0) {
                    return Err(format!("pc needs U in (0, 1), got {u}"));
                }
                PriorSpec::Pc { u, alpha }
            }
            "loggamma" => {
                let (a, b) = two("shape, rate")?;
                if !(a > 0.0 && b > 0.0) {
                    return Err(format!(
                        "loggamma needs positive shape and rate, got [{a}, {b}]"
                    ));
                }
                PriorSpec::LogGamma { a, b }
            }
            "gaussian" | "normal" => {
                let (mean, prec) = two("mean, precision")?;
                if !(prec > 0.0) || !mean.is_finite() {
                    return Err(format!("gaussian prior needs a finite mean and positive precision, got [{mean}, {prec}]"));
                }
                PriorSpec::Gaussian { mean, prec }
            }
            "flat" => {
                if !param.is_empty() {
                    return Err("flat prior takes no parameters".into());
                }
                PriorSpec::Flat
            }
            "table" => return Self::table(param),
            "pc.dof" | "betacorrelation" => {
                return Err(format!("prior `{name}` is not implemented"));
            }
            other => return Err(format!("unknown prior `{other}`")),
        };
        Ok(spec)
    }

    fn table(values: &[f64]) -> std::result::Result<Self, String> {
        if values.len() % 2 != 0 || values.len() < 10 {
            return Err(format!(
                "table prior needs at least 5 (θ, log-density) pairs as [x…, y…], got {} values",
                values.len()
            ));
        }
        let (x, logd) = values.split_at(values.len() / 2);
        if x.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err("table prior grid must be finite and strictly increasing".into());
        }
        Ok(PriorSpec::Table {
            x: x.to_vec(),
            logd: logd.to_vec(),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorSpec::PcPrec { .. } => "pc.prec",
            PriorSpec::PcCor1 { .. } => "pc.cor1",
            PriorSpec::PcCor0 { .. } => "pc.cor0",
            PriorSpec::Pc { .. } => "pc",
            PriorSpec::LogGamma { .. } => "loggamma",
            PriorSpec::Gaussian { .. } => "gaussian",
            PriorSpec::Flat => "flat",
            PriorSpec::Table { .. } => "table",
        }
    }

    /// Parameters in model-file order; `parse(name(), params())` reproduces `self`.
    pub fn params(&self) -> Vec<f64> {
        match self {
            PriorSpec::PcPrec { u, alpha }
            | PriorSpec::PcCor1 { u, alpha }
            | PriorSpec::PcCor0 { u, alpha }
            | PriorSpec::Pc { u, alpha } => vec![*u, *alpha],
            PriorSpec::LogGamma { a, b } => vec![*a, *b],
            PriorSpec::Gaussian { mean, prec } => vec![*mean, *prec],
            PriorSpec::Flat => vec![],
            PriorSpec::Table { x, logd } => x.iter().chain(logd).copied().collect(),
        }
    }

    /// Checks that the prior family makes sense for a parameter with transform `t`.
    pub fn check_transform(&self, t: Transform) -> std::result::Result<(), String> {
        let ok = match self {
            PriorSpec::PcPrec { .. } | PriorSpec::LogGamma { .. } => t == Transform::LogPrecision,
            PriorSpec::PcCor1 { .. } | PriorSpec::PcCor0 { .. } => t == Transform::Fisher,
            PriorSpec::Pc { .. } => t == Transform::Logit,
            PriorSpec::Gaussian { .. } | PriorSpec::Flat | PriorSpec::Table { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(format!(
                "prior `{}` cannot be used for a {t:?}-scale parameter",
                self.name()
            ))
        }
    }

    /// Binds the prior to its transform.
    ///
    /// `mixing_eigenvalues` are the nonzero eigenvalues of the scaled ICAR
    /// covariance and are required by the bym2 mixing prior `pc`.
    pub fn resolve(
        &self,
        t: Transform,
        mixing_eigenvalues: Option<&[f64]>,
    ) -> std::result::Result<Prior, String> {
        self.check_transform(t)?;
        let kind = match *self {
            PriorSpec::PcPrec { u, alpha } => Kind::PcPrec {
                lambda: -alpha.ln() / u,
            },
            PriorSpec::PcCor1 { u, alpha } => {
                let dmax = std::f64::consts::SQRT_2;
                // P(ρ > u) = P(d < √(1 − u))
                Kind::PcCor1 {
                    lambda: truncated_rate((1.0 - u).sqrt(), dmax, alpha),
                    dmax,
                }
            }
            PriorSpec::PcCor0 { u, alpha } => Kind::PcCor0 {
                lambda: -alpha.ln() / (-(1.0 - u * u).ln()).sqrt(),
            },
            PriorSpec::Pc { u, alpha } => {
                let gammas = mixing_eigenvalues
                    .ok_or_else(|| {
                        "prior `pc` is only available for the bym2 mixing parameter".to_string()
                    })?
                    .to_vec();
                let mix = MixingDistance { gammas };
                let dmax = mix.distance(1.0);
                Kind::Pc {
                    lambda: truncated_rate(mix.distance(u), dmax, alpha),
                    dmax,
                    mix,
                }
            }
            PriorSpec::LogGamma { a, b } => Kind::LogGamma {
                a,
                b,
                log_const: a * b.ln() - ln_gamma(a),
            },
            PriorSpec::Gaussian { mean, prec } => Kind::Gaussian { mean, prec },
            PriorSpec::Flat => Kind::Flat,
            PriorSpec::Table { ref x, ref logd } => Kind::Table(TablePrior::new(x, logd)),
        };
        Ok(Prior {
            spec: self.clone(),
            transform: t,
            kind,
        })
    }
}

/// A prior bound to its internal-scale transform.
#[derive(Debug, Clone)]
pub struct Prior {
    spec: PriorSpec,
    transform: Transform,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    PcPrec {
        lambda: f64,
    },
    PcCor1 {
        lambda: f64,
        dmax: f64,
    },
    PcCor0 {
        lambda: f64,
    },
    Pc {
        lambda: f64,
        dmax: f64,
        mix: MixingDistance,
    },
    LogGamma {
        a: f64,
        b: f64,
        log_const: f64,
    },
    Gaussian {
        mean: f64,
        prec: f64,
    },
    Flat,
    Table(TablePrior),
}

impl Prior {
    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    /// Rate of the exponential on the distance scale, for PC priors.
    pub fn pc_rate(&self) -> Option<f64> {
        match self.kind {
            Kind::PcPrec { lambda }
            | Kind::PcCor1 { lambda, .. }
            | Kind::PcCor0 { lambda }
            | Kind::Pc { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    /// Log-density of `θ` on the internal scale.
    pub fn log_density(&self, theta: f64) -> f64 {
        match &self.kind {
            Kind::PcPrec { lambda } => {
                (lambda / 2.0).ln() - theta / 2.0 - lambda * (-theta / 2.0).exp()
            }
            Kind::PcCor1 { lambda, dmax } => {
                // d = √(1 − ρ), |d′| = 1/(2d), dρ/dθ = (1 − ρ²)/2
                let ln_1m_rho = std::f64::consts::LN_2 - softplus(theta);
                let ln_1m_rho2 = 2.0 * std::f64::consts::LN_2 - softplus(theta) - softplus(-theta);
                let d = (0.5 * ln_1m_rho).exp();
                truncated_log_pdf(d, *lambda, *dmax) - (2.0 * d).ln() + ln_1m_rho2
                    - std::f64::consts::LN_2
            }
            Kind::PcCor0 { lambda } => {
                // d = √(−log(1 − ρ²)), symmetric in ρ, half the mass on each side
                if theta == 0.0 {
                    return (lambda / 2.0).ln() - std::f64::consts::LN_2;
                }
                let rho = (theta / 2.0).tanh();
                let d = log_sech2_neg(theta / 2.0).sqrt();
                (lambda / 2.0).ln() - lambda * d + rho.abs().ln() - d.ln() - std::f64::consts::LN_2
            }
            Kind::Pc { lambda, dmax, mix } => {
                let phi = expit(theta);
                let ln_jac = -softplus(theta) - softplus(-theta);
                let (d, dd) = mix.distance_and_derivative(phi);
                if d == 0.0 {
                    return f64::NEG_INFINITY;
                }
                truncated_log_pdf(d, *lambda, *dmax) + dd.ln() + ln_jac
            }
            Kind::LogGamma { a, b, log_const } => log_const + a * theta - b * theta.exp(),
            Kind::Gaussian { mean, prec } => {
                0.5 * (prec / (2.0 * std::f64::consts::PI)).ln()
                    - 0.5 * prec * (theta - mean).powi(2)
            }
            Kind::Flat => 0.0,
            Kind::Table(t) => t.log_density(theta),
        }
    }

    /// Internal-scale median of the prior, used as a restart point.
    ///
    /// Flat priors have none and return 0.
    pub fn median(&self) -> f64 {
        match &self.kind {
            // σ is exponential with median ln 2/λ, and θ = −2 log σ
            Kind::PcPrec { lambda } => -2.0 * (std::f64::consts::LN_2 / lambda).ln(),
            Kind::Gaussian { mean, .. } => *mean,
            Kind::Flat => 0.0,
            Kind::Table(t) => t.median(),
            _ => numeric_median(|t| self.log_density(t), -40.0, 40.0),
        }
    }
}

/// Solves `(1 − e^{−λa})/(1 − e^{−λb}) = alpha` for the rate of an
/// exponential truncated to `[0, b]`; `λ` may be negative.
fn truncated_rate(a: f64, b: f64, alpha: f64) -> f64 {
    let cdf = |lambda: f64| {
        if lambda.abs() < 1e-12 {
            a / b
        } else {
            (-lambda * a).exp_m1() / (-lambda * b).exp_m1()
        }
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while cdf(lo) > alpha {
        lo *= 2.0;
    }
    while cdf(hi) < alpha {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Log-density at `d` of an exponential with rate `λ` truncated to `[0, b]`.
fn truncated_log_pdf(d: f64, lambda: f64, b: f64) -> f64 {
    if lambda.abs() < 1e-12 {
        return -b.ln();
    }
    (lambda / -(-lambda * b).exp_m1()).ln() - lambda * d
}

/// `−log(1 − tanh²(x)) = 2 log cosh x`, accurate near 0 and for large `|x|`.
fn log_sech2_neg(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1.0 {
        2.0 * (2.0 * (ax / 2.0).sinh().powi(2)).ln_1p()
    } else {
        2.0 * (ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2)
    }
}

/// `x − log(1 + x)` without cancellation for small `x`.
fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x2 / 2.0 - x2 * x / 3.0 + x2 * x2 / 4.0 - x2 * x2 * x / 5.0
    } else {
        x - x.ln_1p()
    }
}

/// Distance from the iid base model of a bym2 mixture with proportion `φ`.
///
/// With `γ` the nonzero eigenvalues of the scaled ICAR covariance, the
/// Kullback–Leibler divergence is `½ Σ [φ(γ−1) − log(1 + φ(γ−1))]` and the
/// distance is `√(2 KLD)`.
#[derive(Debug, Clone)]
struct MixingDistance {
    gammas: Vec<f64>,
}

impl MixingDistance {
    fn kld(&self, phi: f64) -> f64 {
        0.5 * self
            .gammas
            .iter()
            .map(|g| x_minus_log1p(phi * (g - 1.0)))
            .sum::<f64>()
    }

    fn distance(&self, phi: f64) -> f64 {
        (2.0 * self.kld(phi)).sqrt()
    }

    /// `(d, d′)` at `φ`.
    fn distance_and_derivative(&self, phi: f64) -> (f64, f64) {
        let d = self.distance(phi);
        if d == 0.0 {
            // d ≈ φ √(½ Σ (γ−1)²) near the base model
            let s: f64 = self.gammas.iter().map(|g| (g - 1.0).powi(2)).sum();
            return (0.0, (0.5 * s).sqrt());
        }
        let dk = 0.5
            * phi
            * self
                .gammas
                .iter()
                .map(|g| {
                    let c = g - 1.0;
                    c * c / (1.0 + phi * c)
                })
                .sum::<f64>();
        (d, dk / d)
    }
}

/// User-supplied log-density on a `θ` grid, normalized at construction.
#[derive(Debug, Clone)]
struct TablePrior {
    pchip: Pchip,
    log_norm: f64,
}

impl TablePrior {
    fn new(x: &[f64], logd: &[f64]) -> Self {
        let pchip = Pchip::new(x.to_vec(), logd.to_vec());
        let m = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mass: f64 = x
            .windows(2)
            .zip(logd.windows(2))
            .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * ((yw[0] - m).exp() + (yw[1] - m).exp()))
            .sum();
        Self {
            pchip,
            log_norm: m + mass.ln(),
        }
    }

    fn log_density(&self, theta: f64) -> f64 {
        if theta < self.pchip.lo() || theta > self.pchip.hi() {
            return f64::NEG_INFINITY;
        }
        self.pchip.eval(theta) - self.log_norm
    }

    fn median(&self) -> f64 {
        numeric_median(|t| self.log_density(t), self.pchip.lo(), self.pchip.hi())
    }
}

fn numeric_median(logd: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 8001;
    let h = (hi - lo) / (n - 1) as f64;
    let ld: Vec<f64> = (0..n).map(|i| logd(lo + i as f64 * h)).collect();
    let m = ld.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = ld.iter().map(|v| (v - m).exp()).collect();
    let mut cum = vec![0.0; n];
    for i in 1..n {
        cum[i] = cum[i - 1] + 0.5 * h * (dens[i] + dens[i - 1]);
    }
    let half = cum[n - 1] / 2.0;
    let k = cum.partition_point(|&c| c < half).clamp(1, n - 1);
    let frac = (half - cum[k - 1]) / (cum[k] - cum[k - 1]).max(f64::MIN_POSITIVE);
    lo + (k as f64 - 1.0 + frac) * h
}
