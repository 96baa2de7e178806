//! The assembled latent Gaussian model: hyperparameters, priors and the
//! θ-dependent precision of the whole latent field.

use std::sync::{Arc, OnceLock};

use crate::data::DataTable;
use crate::design::{assemble, Assembly};
use crate::error::{Error, Result};
use crate::families::Family;
use crate::priors::{Prior, PriorSpec, Transform};
use crate::sparse::{Constraints, SparseSym, Symbolic};
use crate::spec::{HyperSpec, ModelSpec};

/// What a hyperparameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    /// Index into the family's hyperparameters.
    Family(usize),
    /// Component `k`, hyperparameter `j`.
    Component(usize, usize),
}

#[derive(Debug, Clone)]
pub struct HyperParam {
    /// Internal name, e.g. `idarea.theta2`.
    pub name: String,
    /// Summary label, e.g. `Precision for idarea (spatial component)`.
    pub label: String,
    pub owner: Owner,
    pub prior: Prior,
    /// Starting value on the internal scale.
    pub initial: f64,
    pub fixed: bool,
}

impl HyperParam {
    pub fn transform(&self) -> Transform {
        self.prior.transform()
    }
}

/// A model ready for inference.
#[derive(Debug)]
pub struct LatentModel {
    pub spec: ModelSpec,
    pub asm: Assembly,
    pub family: Family,
    pub hypers: Vec<HyperParam>,
    /// Positions in `hypers` of the hyperparameters that are integrated over.
    free: Vec<usize>,
    constraints: Constraints,
    /// For each observation, the stored entries `(column, value)` of its row of `A`.
    rows: Vec<Vec<(usize, f64)>>,
    symbolic: OnceLock<Arc<Symbolic>>,
}

/// Natural-scale hyperparameters of the family and each component at some θ.
#[derive(Debug, Clone)]
pub struct HyperValues {
    /// Internal scale, as the family code expects.
    pub family: Vec<f64>,
    pub components: Vec<Vec<f64>>,
}

impl LatentModel {
    pub fn new(spec: &ModelSpec, data: &DataTable) -> Result<Self> {
        let asm = assemble(spec, data)?;
        let mut hypers = Vec::new();

        for (j, name) in spec.family.hyper_names().iter().enumerate() {
            let h = spec
                .control
                .family
                .hyper
                .get(*name)
                .or_else(|| spec.control.family.hyper.get(&format!("theta{}", j + 1)));
            let default = match spec.family {
                Family::Gaussian => PriorSpec::LogGamma { a: 1.0, b: 5e-5 },
                _ => PriorSpec::LogGamma { a: 1.0, b: 0.01 },
            };
            let path = format!("control.family.hyper.{name}");
            let label = spec.family.hyper_label().unwrap_or(name).to_string();
            hypers.push(make_hyper(
                h,
                default,
                Transform::LogPrecision,
                None,
                name.to_string(),
                label,
                Owner::Family(j),
                &path,
            )?);
        }

        for (k, (c, model)) in spec.random.iter().zip(&asm.components).enumerate() {
            let kind = c.model;
            let mut given: Vec<Option<(&String, &HyperSpec)>> =
                vec![None; kind.hyper_names().len()];
            for (name, h) in &c.hyper {
                let j = kind.hyper_index(name).expect("validated");
                if let Some((prev, _)) = given[j] {
                    return Err(Error::spec(
                        format!("random[{k}].hyper.{name}"),
                        format!("same hyperparameter as `{prev}`"),
                    ));
                }
                given[j] = Some((name, h));
            }
            for (j, canonical) in kind.hyper_names().iter().enumerate() {
                let path = format!(
                    "random[{k}].hyper.{}",
                    given[j].map_or(*canonical, |g| g.0.as_str())
                );
                hypers.push(make_hyper(
                    given[j].map(|g| g.1),
                    kind.default_prior(j),
                    kind.transforms()[j],
                    model.mixing_eigenvalues(),
                    format!("{}.{canonical}", c.id),
                    kind.hyper_label(j, &c.id),
                    Owner::Component(k, j),
                    &path,
                )?);
            }
        }
        let free = (0..hypers.len()).filter(|&i| !hypers[i].fixed).collect();

        let mut constraints = Constraints::default();
        for (b, m) in asm.layout.components.iter().zip(&asm.components) {
            constraints.extend(m.constraints().embedded(asm.layout.n, b.offset));
        }
        let rows = (0..asm.y.len())
            .map(|i| {
                let (c, v) = asm.design.a.row(i);
                c.iter().copied().zip(v.iter().copied()).collect()
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            family: spec.family,
            asm,
            hypers,
            free,
            constraints,
            rows,
            symbolic: OnceLock::new(),
        })
    }

    /// Size of the latent field.
    pub fn n_latent(&self) -> usize {
        self.asm.layout.n
    }

    pub fn n_obs(&self) -> usize {
        self.asm.y.len()
    }

    /// Number of hyperparameters integrated over.
    pub fn n_theta(&self) -> usize {
        self.free.len()
    }

    /// The integrated hyperparameters, in θ order.
    pub fn free_hypers(&self) -> impl Iterator<Item = &HyperParam> {
        self.free.iter().map(|&i| &self.hypers[i])
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn initial_theta(&self) -> Vec<f64> {
        self.free_hypers().map(|h| h.initial).collect()
    }

    pub fn prior_median_theta(&self) -> Vec<f64> {
        self.free_hypers().map(|h| h.prior.median()).collect()
    }

    /// Every hyperparameter on the internal scale, fixed ones included.
    pub fn full_theta(&self, theta: &[f64]) -> Vec<f64> {
        let mut full: Vec<f64> = self.hypers.iter().map(|h| h.initial).collect();
        for (&i, &t) in self.free.iter().zip(theta) {
            full[i] = t;
        }
        full
    }

    pub fn hyper_values(&self, theta: &[f64]) -> HyperValues {
        let full = self.full_theta(theta);
        let mut family = Vec::new();
        let mut components: Vec<Vec<f64>> =
            self.asm.components.iter().map(|_| Vec::new()).collect();
        for (h, &t) in self.hypers.iter().zip(&full) {
            match h.owner {
                Owner::Family(_) => family.push(t),
                Owner::Component(k, _) => components[k].push(h.transform().from_internal(t)),
            }
        }
        HyperValues { family, components }
    }

    /// Sum of the log prior densities of the integrated hyperparameters.
    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        self.free_hypers()
            .zip(theta)
            .map(|(h, &t)| h.prior.log_density(t))
            .sum()
    }

    /// Checks that every natural-scale value is inside its domain.
    pub fn theta_in_domain(&self, theta: &[f64]) -> bool {
        let hv = self.hyper_values(theta);
        theta.iter().all(|t| t.is_finite())
            && hv.components.iter().flatten().all(|v| v.is_finite())
            && hv
                .components
                .iter()
                .zip(&self.asm.components)
                .all(|(h, c)| match c.kind() {
                    crate::gmrf::ModelKind::Ar1 => h[0] > 0.0 && h[1].abs() < 1.0,
                    crate::gmrf::ModelKind::Bym2 => h[0] > 0.0 && h[1] > 0.0 && h[1] < 1.0,
                    _ => h.iter().all(|v| *v > 0.0),
                })
    }

    /// Prior precision `Q(θ)` as triplets on the latent field, and its
    /// log-determinant on the constraint space.
    pub fn prior_precision(&self, hv: &HyperValues) -> (Vec<(usize, usize, f64)>, f64) {
        let layout = &self.asm.layout;
        let mut t = Vec::new();
        let mut ld = 0.0;
        for (j, &p) in self.asm.fixed_prec.iter().enumerate() {
            t.push((layout.fixed.offset + j, layout.fixed.offset + j, p));
            ld += p.ln();
        }
        for ((b, c), h) in layout
            .components
            .iter()
            .zip(&self.asm.components)
            .zip(&hv.components)
        {
            let q = c.precision(h);
            t.extend(q.iter().map(|(i, j, v)| (i + b.offset, j + b.offset, v)));
            ld += c.log_det(h);
        }
        (t, ld)
    }

    /// `Q + Aᵀ diag(h) A`. Every row of `A` contributes to the pattern, so the
    /// pattern is the same for every θ and every curvature vector.
    pub fn posterior_precision(&self, q: &[(usize, usize, f64)], h: &[f64]) -> Result<SparseSym> {
        let mut t = q.to_vec();
        for (row, &hi) in self.rows.iter().zip(h) {
            for (a, &(j, aj)) in row.iter().enumerate() {
                for &(k, ak) in &row[..=a] {
                    t.push((j, k, hi * aj * ak));
                }
            }
        }
        SparseSym::from_triplets(self.n_latent(), &t)
    }

    /// Shared symbolic analysis of the posterior precision pattern.
    pub fn symbolic(&self, p: &SparseSym) -> Arc<Symbolic> {
        Arc::clone(self.symbolic.get_or_init(|| Arc::new(Symbolic::analyze(p))))
    }

    /// `A x`.
    pub fn eta(&self, x: &[f64]) -> Vec<f64> {
        self.asm.design.a.mul_vec(x)
    }
}

#[allow(clippy::too_many_arguments)]
fn make_hyper(
    h: Option<&HyperSpec>,
    default: PriorSpec,
    t: Transform,
    mixing: Option<&[f64]>,
    name: String,
    label: String,
    owner: Owner,
    path: &str,
) -> Result<HyperParam> {
    let spec = match h.map(|h| h.prior_spec()) {
        Some(Err(m)) => return Err(Error::spec(format!("{path}.prior"), m)),
        Some(Ok(Some(s))) => s,
        _ => default,
    };
    let prior = spec
        .resolve(t, mixing)
        .map_err(|m| Error::spec(format!("{path}.prior"), m))?;
    let initial = h.and_then(|h| h.initial).unwrap_or(0.0);
    Ok(HyperParam {
        name,
        label,
        owner,
        prior,
        initial,
        fixed: h.is_some_and(|h| h.fixed),
    })
}
