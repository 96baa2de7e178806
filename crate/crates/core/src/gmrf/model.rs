use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::structure::{self, NullSpace};
use super::Graph;
use crate::error::{Error, Result};
use crate::priors::{PriorSpec, Transform};
use crate::sparse::{factorize, Constraints, SparseSym};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Iid,
    Rw1,
    Rw2,
    Ar1,
    Bym,
    Bym2,
    Generic0,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Iid => "iid",
            ModelKind::Rw1 => "rw1",
            ModelKind::Rw2 => "rw2",
            ModelKind::Ar1 => "ar1",
            ModelKind::Bym => "bym",
            ModelKind::Bym2 => "bym2",
            ModelKind::Generic0 => "generic0",
        }
    }

    /// Canonical hyperparameter names, in θ order.
    pub fn hyper_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Iid | ModelKind::Rw1 | ModelKind::Rw2 | ModelKind::Generic0 => &["prec"],
            ModelKind::Ar1 => &["prec", "rho"],
            // theta1 is the unstructured precision, theta2 the spatial one
            ModelKind::Bym => &["theta1", "theta2"],
            ModelKind::Bym2 => &["prec", "phi"],
        }
    }

    /// Position of a hyperparameter given by canonical name, alias or `thetaN`.
    pub fn hyper_index(self, name: &str) -> Option<usize> {
        let names = self.hyper_names();
        if let Some(i) = names.iter().position(|n| *n == name) {
            return Some(i);
        }
        let alias = match (self, name) {
            (ModelKind::Bym, "prec.unstruct" | "prec.iid") => Some(0),
            (ModelKind::Bym, "prec.spatial") => Some(1),
            _ => None,
        };
        alias.or_else(|| {
            let k: usize = name.strip_prefix("theta")?.parse().ok()?;
            (1..=names.len()).contains(&k).then(|| k - 1)
        })
    }

    pub fn transforms(self) -> &'static [Transform] {
        match self {
            ModelKind::Ar1 => &[Transform::LogPrecision, Transform::Fisher],
            ModelKind::Bym => &[Transform::LogPrecision, Transform::LogPrecision],
            ModelKind::Bym2 => &[Transform::LogPrecision, Transform::Logit],
            _ => &[Transform::LogPrecision],
        }
    }

    pub fn default_prior(self, j: usize) -> PriorSpec {
        match self.transforms()[j] {
            Transform::Fisher => PriorSpec::PcCor1 { u: 0.9, alpha: 0.9 },
            Transform::Logit => PriorSpec::Pc { u: 0.5, alpha: 0.5 },
            _ => PriorSpec::PcPrec {
                u: 1.0,
                alpha: 0.01,
            },
        }
    }

    /// Display label of hyperparameter `j` for a component indexed by `id`.
    pub fn hyper_label(self, j: usize, id: &str) -> String {
        match (self, j) {
            (ModelKind::Bym, 0) => format!("Precision for {id} (iid component)"),
            (ModelKind::Bym, 1) => format!("Precision for {id} (spatial component)"),
            (ModelKind::Ar1, 1) => format!("Rho for {id}"),
            (ModelKind::Bym2, 1) => format!("Phi for {id}"),
            _ => format!("Precision for {id}"),
        }
    }

    /// True for models whose structure matrix is rank deficient.
    pub fn is_intrinsic(self) -> bool {
        matches!(
            self,
            ModelKind::Rw1 | ModelKind::Rw2 | ModelKind::Bym | ModelKind::Bym2
        )
    }
}

/// Model-file flags and inputs of a latent component.
#[derive(Debug, Clone, Default)]
pub struct ComponentOptions {
    pub constr: bool,
    pub scale_model: bool,
    pub cyclic: bool,
    pub graph: Option<Graph>,
    pub q: Option<SparseSym>,
}

/// A latent component with its θ-independent precomputations: the (scaled)
/// structure matrix, null space, constraints and log-determinant constants.
#[derive(Debug, Clone)]
pub struct ComponentModel {
    kind: ModelKind,
    m: usize,
    /// Scaled structure matrix; unused for ar1.
    structure: SparseSym,
    scale: f64,
    rank_deficiency: usize,
    constr: bool,
    constraints: Constraints,
    /// θ-free part of the log-determinant term.
    ld_const: f64,
    /// `log 1ᵀ R⁻¹ 1` for a constrained generic0.
    ld_constr: f64,
    mixing_eigenvalues: Option<Vec<f64>>,
}

impl ComponentModel {
    pub fn new(kind: ModelKind, m: usize, opts: ComponentOptions) -> Result<Self> {
        if opts.cyclic && !matches!(kind, ModelKind::Rw1 | ModelKind::Rw2) {
            return Err(Error::Domain(format!(
                "cyclic is only valid for rw1/rw2, not {}",
                kind.name()
            )));
        }
        if m == 0 {
            return Err(Error::Domain(format!(
                "{} component has no levels",
                kind.name()
            )));
        }
        let (raw, null) = match kind {
            ModelKind::Iid | ModelKind::Ar1 => (structure::iid(m), NullSpace::none()),
            ModelKind::Rw1 => (
                structure::random_walk(1, m, opts.cyclic)?,
                NullSpace::constant(m),
            ),
            ModelKind::Rw2 => (
                structure::random_walk(2, m, opts.cyclic)?,
                if opts.cyclic {
                    NullSpace::constant(m)
                } else {
                    NullSpace::linear(m)
                },
            ),
            ModelKind::Bym | ModelKind::Bym2 => {
                let g = opts
                    .graph
                    .as_ref()
                    .ok_or_else(|| Error::Domain(format!("{} needs a graph", kind.name())))?;
                if g.n() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: g.n(),
                    });
                }
                (structure::icar(g), NullSpace::components(g))
            }
            ModelKind::Generic0 => {
                let q = opts
                    .q
                    .clone()
                    .ok_or_else(|| Error::Domain("generic0 needs a precision matrix Q".into()))?;
                if q.n() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: q.n(),
                    });
                }
                (q, NullSpace::none())
            }
        };
        let r = null.dim();
        let scaled = opts.scale_model || kind == ModelKind::Bym2;
        let needs_ld = !matches!(kind, ModelKind::Iid | ModelKind::Ar1);
        let (scale, logdet_raw) = if needs_ld || scaled {
            let (var, logdet) =
                structure::generalized_variances(&raw, &null).map_err(|e| match e {
                    Error::NotPositiveDefinite { .. } => Error::Domain(format!(
                        "{} structure matrix is not positive definite on its constraint space",
                        kind.name()
                    )),
                    other => other,
                })?;
            let s = if scaled && kind != ModelKind::Iid && kind != ModelKind::Ar1 {
                structure::geometric_mean(&var)
            } else {
                1.0
            };
            (s, logdet)
        } else {
            (1.0, 0.0)
        };
        let structure = if scale != 1.0 { raw.scaled(scale) } else { raw };
        let ld_const = logdet_raw + (m - r) as f64 * scale.ln();

        let block = if matches!(kind, ModelKind::Bym | ModelKind::Bym2) {
            2 * m
        } else {
            m
        };
        let mut constraints = Constraints::default();
        match kind {
            ModelKind::Rw1 | ModelKind::Rw2 => constraints.push_sum_to_zero(m, 0, m),
            ModelKind::Bym | ModelKind::Bym2 => {
                for v in &null.basis {
                    let mut row = vec![0.0; block];
                    row[m..].copy_from_slice(v);
                    constraints.push(row, 0.0);
                }
            }
            _ if opts.constr => constraints.push_sum_to_zero(m, 0, m),
            _ => {}
        }
        // log det(C Cᵀ) over the constraint rows, so that intrinsic models
        // carry the exact normaliser log|Q + CᵀC| + log|C (Q + CᵀC)⁻¹ Cᵀ|
        let ld_const = if kind.is_intrinsic() {
            let k = constraints.len();
            let cc = DMatrix::from_fn(k, k, |a, b| {
                constraints.rows()[a]
                    .iter()
                    .zip(&constraints.rows()[b])
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            });
            ld_const + cc.determinant().ln()
        } else {
            ld_const
        };
        let ld_constr = if kind == ModelKind::Generic0 && opts.constr {
            let f = factorize(&structure, 0.0)?;
            f.solve(&vec![1.0; m])?.iter().sum::<f64>().ln()
        } else {
            0.0
        };
        let mixing_eigenvalues = (kind == ModelKind::Bym2)
            .then(|| structure::generalized_inverse_eigenvalues(&structure));
        Ok(Self {
            kind,
            m,
            structure,
            scale,
            rank_deficiency: r,
            constr: opts.constr || kind.is_intrinsic(),
            constraints,
            ld_const,
            ld_constr,
            mixing_eigenvalues,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Number of levels of the underlying field.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Length of the latent block (`2m` for bym and bym2).
    pub fn block_len(&self) -> usize {
        match self.kind {
            ModelKind::Bym | ModelKind::Bym2 => 2 * self.m,
            _ => self.m,
        }
    }

    pub fn structure(&self) -> &SparseSym {
        &self.structure
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rank_deficiency(&self) -> usize {
        self.rank_deficiency
    }

    pub fn is_constrained(&self) -> bool {
        self.constr
    }

    /// Constraints in block-local coordinates.
    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn mixing_eigenvalues(&self) -> Option<&[f64]> {
        self.mixing_eigenvalues.as_deref()
    }

    /// Named sub-blocks reported in summaries: `(label, start, len)`.
    pub fn reported_blocks(&self) -> Vec<(&'static str, usize, usize)> {
        match self.kind {
            ModelKind::Bym | ModelKind::Bym2 => vec![("b", 0, self.m), ("u", self.m, self.m)],
            _ => vec![("u", 0, self.m)],
        }
    }

    /// Precision of the latent block at natural-scale hyperparameters `h`.
    /// The sparsity pattern does not depend on `h`.
    pub fn precision(&self, h: &[f64]) -> SparseSym {
        let m = self.m;
        match self.kind {
            ModelKind::Iid | ModelKind::Rw1 | ModelKind::Rw2 | ModelKind::Generic0 => {
                self.structure.scaled(h[0])
            }
            ModelKind::Ar1 => structure::ar1(m, h[0], h[1]),
            ModelKind::Bym => {
                let (tv, tu) = (h[0], h[1]);
                self.two_block(tv, -tv, tv, tu)
            }
            ModelKind::Bym2 => {
                let (tau, phi) = (h[0], h[1]);
                let a = tau / (1.0 - phi);
                let c = -(phi * tau).sqrt() / (1.0 - phi);
                let d = phi / (1.0 - phi);
                self.two_block(a, c, d, 1.0)
            }
        }
    }

    /// `[[a I, c I], [c I, d I + w R]]` on `(b, u)`.
    fn two_block(&self, a: f64, c: f64, d: f64, w: f64) -> SparseSym {
        let m = self.m;
        let mut t = Vec::with_capacity(3 * m + self.structure.nnz());
        for i in 0..m {
            t.push((i, i, a));
            t.push((m + i, i, c));
            t.push((m + i, m + i, d));
        }
        for (i, j, v) in self.structure.iter() {
            t.push((m + i, m + j, w * v));
        }
        SparseSym::from_triplets(2 * m, &t).expect("indices are in range")
    }

    /// Log-determinant of the block precision on the constraint space.
    ///
    /// For a proper precision `Q` under constraints `C x = 0` this is
    /// `log|Q| + log|C Q⁻¹ Cᵀ|`. For intrinsic models `Q` is replaced by
    /// `Q + CᵀC`; when the constraints span the null space this is the
    /// generalized determinant plus `log det(C Cᵀ)`.
    pub fn log_det(&self, h: &[f64]) -> f64 {
        let m = self.m as f64;
        let r = self.rank_deficiency as f64;
        match self.kind {
            ModelKind::Iid => {
                let base = m * h[0].ln();
                if self.constr {
                    base - h[0].ln() + m.ln()
                } else {
                    base
                }
            }
            ModelKind::Rw1 | ModelKind::Rw2 => (m - r) * h[0].ln() + self.ld_const,
            ModelKind::Generic0 => {
                let base = m * h[0].ln() + self.ld_const;
                if self.constr {
                    base - h[0].ln() + self.ld_constr
                } else {
                    base
                }
            }
            ModelKind::Ar1 => {
                let (tau, rho) = (h[0], h[1]);
                if self.m == 1 {
                    return if self.constr { 0.0 } else { tau.ln() };
                }
                let one_m_rho2 = 1.0 - rho * rho;
                let base = m * (tau / one_m_rho2).ln() + one_m_rho2.ln();
                if self.constr {
                    // 1ᵀΣ1 with Σ_ij = ρ^|i−j| / τ
                    let mut s = m;
                    let mut pk = 1.0;
                    for k in 1..self.m {
                        pk *= rho;
                        s += 2.0 * (m - k as f64) * pk;
                    }
                    base + (s / tau).ln()
                } else {
                    base
                }
            }
            ModelKind::Bym => m * h[0].ln() + (m - r) * h[1].ln() + self.ld_const,
            ModelKind::Bym2 => m * h[0].ln() - m * (1.0 - h[1]).ln() + self.ld_const,
        }
    }
}
