use nalgebra::{DMatrix, DVector};

use super::CholFactor;
use crate::error::{Error, Result};

/// Linear equality constraints `C x = e` with `C` stored densely by rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl Constraints {
    pub fn push(&mut self, row: Vec<f64>, rhs: f64) {
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    /// Sum-to-zero over indices `start..start + len` of an `n`-vector.
    pub fn push_sum_to_zero(&mut self, n: usize, start: usize, len: usize) {
        let mut row = vec![0.0; n];
        row[start..start + len].iter_mut().for_each(|v| *v = 1.0);
        self.push(row, 0.0);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// `C x − e`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, e)| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - e)
            .collect()
    }

    /// Constraints embedded into a longer vector at `offset`.
    pub fn embedded(&self, n: usize, offset: usize) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut full = vec![0.0; n];
                full[offset..offset + r.len()].copy_from_slice(r);
                full
            })
            .collect();
        Self {
            rows,
            rhs: self.rhs.clone(),
        }
    }

    pub fn extend(&mut self, other: Constraints) {
        self.rows.extend(other.rows);
        self.rhs.extend(other.rhs);
    }
}

/// Quantities for conditioning `N(μ, Q⁻¹)` on `C x = e`:
/// `V = Q⁻¹ Cᵀ` and `W = C V`.
#[derive(Debug, Clone)]
pub struct ConstraintCorrection {
    constraints: Constraints,
    /// `n × k`.
    v: DMatrix<f64>,
    w_inv: DMatrix<f64>,
    logdet_w: f64,
}

impl ConstraintCorrection {
    pub fn new(f: &CholFactor, c: &Constraints) -> Result<Self> {
        let n = f.n();
        let k = c.len();
        let mut v = DMatrix::zeros(n, k);
        if k == 0 {
            return Ok(Self {
                constraints: c.clone(),
                v,
                w_inv: DMatrix::zeros(0, 0),
                logdet_w: 0.0,
            });
        }
        for (j, row) in c.rows().iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            let col = f.solve(row)?;
            v.set_column(j, &DVector::from_vec(col));
        }
        let cm = DMatrix::from_fn(k, n, |i, j| c.rows()[i][j]);
        let w = &cm * &v;
        let w = (&w + w.transpose()) * 0.5;
        let chol = w.clone().cholesky().ok_or(Error::SingularConstraint)?;
        let logdet_w = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        // relative check so near-dependent rows are caught as well
        let scale = w.diagonal().max().max(f64::MIN_POSITIVE);
        if chol.l().diagonal().iter().any(|d| d * d <= 1e-12 * scale) {
            return Err(Error::SingularConstraint);
        }
        Ok(Self {
            constraints: c.clone(),
            v,
            w_inv: chol.inverse(),
            logdet_w,
        })
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    /// `log det(C Q⁻¹ Cᵀ)`.
    pub fn logdet_w(&self) -> f64 {
        self.logdet_w
    }

    /// `x − V W⁻¹ (C x − e)`. Applied to a mean it gives the conditional mean;
    /// applied to an unconstrained draw it gives an exact constrained draw.
    pub fn correct(&self, x: &mut [f64]) {
        if self.constraints.is_empty() {
            return;
        }
        let r = DVector::from_vec(self.constraints.residual(x));
        let adj = &self.v * (&self.w_inv * r);
        for (xi, a) in x.iter_mut().zip(adj.iter()) {
            *xi -= a;
        }
    }

    /// `(V W⁻¹ Vᵀ)_ij`, the amount subtracted from `Σ_ij`.
    pub fn cov_correction(&self, i: usize, j: usize) -> f64 {
        let vi = self.v.row(i);
        let vj = self.v.row(j);
        (vi * &self.w_inv * vj.transpose())[(0, 0)]
    }

    pub fn var_correction(&self, i: usize) -> f64 {
        self.cov_correction(i, i)
    }

    /// `(aᵀ V) W⁻¹ (Vᵀ a)` for a sparse vector `a`.
    pub fn lincomb_correction(&self, idx: &[usize], vals: &[f64]) -> f64 {
        let k = self.v.ncols();
        let mut va = DVector::zeros(k);
        for (&i, &a) in idx.iter().zip(vals) {
            for c in 0..k {
                va[c] += a * self.v[(i, c)];
            }
        }
        va.dot(&(&self.w_inv * &va))
    }
}

/// Conditions the Gaussian moments `(mean, marginal variances)` of `N(mean, Q⁻¹)`
/// on `C x = e`. Returns the corrected moments and the correction object.
pub fn constrain_moments(
    f: &CholFactor,
    mean: &[f64],
    var: &[f64],
    c: &Constraints,
) -> Result<(Vec<f64>, Vec<f64>, ConstraintCorrection)> {
    let corr = ConstraintCorrection::new(f, c)?;
    let mut m = mean.to_vec();
    corr.correct(&mut m);
    let v = var
        .iter()
        .enumerate()
        .map(|(i, s)| (s - corr.var_correction(i)).max(0.0))
        .collect();
    Ok((m, v, corr))
}
