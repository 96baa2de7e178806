//! Structure matrices of the built-in latent models and their null spaces.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::Graph;
use crate::error::{Error, Result};
use crate::sparse::{factorize, SparseSym};

pub fn iid(m: usize) -> SparseSym {
    SparseSym::identity(m)
}

/// `DᵀD` for the random walk of order 1 or 2 on `m` nodes. The cyclic
/// variant wraps the differences around.
pub fn random_walk(order: usize, m: usize, cyclic: bool) -> Result<SparseSym> {
    let stencil: &[f64] = match order {
        1 => &[-1.0, 1.0],
        2 => &[1.0, -2.0, 1.0],
        _ => {
            return Err(Error::Domain(format!(
                "random walk order {order} is not supported"
            )))
        }
    };
    let min = if cyclic { order + 2 } else { order + 1 };
    if m < min {
        return Err(Error::Domain(format!(
            "rw{order}{} needs at least {min} nodes, got {m}",
            if cyclic { " (cyclic)" } else { "" }
        )));
    }
    let rows = if cyclic { m } else { m - order };
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for r in 0..rows {
        let idx: Vec<usize> = (0..stencil.len()).map(|k| (r + k) % m).collect();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                if i >= j {
                    *acc.entry((i, j)).or_default() += stencil[a] * stencil[b];
                }
            }
        }
    }
    let t: Vec<_> = acc.into_iter().map(|((i, j), v)| (i, j, v)).collect();
    SparseSym::from_triplets(m, &t)
}

/// Intrinsic CAR structure `D − W` on a graph.
pub fn icar(g: &Graph) -> SparseSym {
    let mut t = Vec::new();
    for i in 0..g.n() {
        t.push((i, i, g.degree(i) as f64));
        for &j in g.neighbors(i) {
            if j < i {
                t.push((i, j, -1.0));
            }
        }
    }
    SparseSym::from_triplets(g.n(), &t).expect("graph indices are in range")
}

/// Stationary AR(1) precision with marginal precision `tau` and lag-one
/// correlation `rho`: innovation precision `κ = τ/(1 − ρ²)` on the
/// tridiagonal `(1, 1+ρ², …, 1+ρ², 1)`, `−ρ` pattern.
pub fn ar1(m: usize, tau: f64, rho: f64) -> SparseSym {
    if m == 1 {
        return SparseSym::diagonal(&[tau]);
    }
    let kappa = tau / (1.0 - rho * rho);
    let mut t = Vec::with_capacity(2 * m);
    for i in 0..m {
        let d = if i == 0 || i == m - 1 {
            1.0
        } else {
            1.0 + rho * rho
        };
        t.push((i, i, kappa * d));
        if i > 0 {
            t.push((i, i - 1, -rho * kappa));
        }
    }
    SparseSym::from_triplets(m, &t).expect("indices are in range")
}

/// A basis `N` of the null space of an intrinsic structure matrix, with
/// `pins`: nodes `K` such that the square block `N_K` is invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpace {
    /// Basis vectors, each of length `m`.
    pub basis: Vec<Vec<f64>>,
    pub pins: Vec<usize>,
}

impl NullSpace {
    pub fn none() -> Self {
        Self {
            basis: Vec::new(),
            pins: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Constant vectors: rw1, and the cyclic walks.
    pub fn constant(m: usize) -> Self {
        Self {
            basis: vec![vec![1.0; m]],
            pins: vec![0],
        }
    }

    /// Constant and linear trend of the open rw2.
    pub fn linear(m: usize) -> Self {
        Self {
            basis: vec![vec![1.0; m], (0..m).map(|i| i as f64).collect()],
            pins: vec![0, m - 1],
        }
    }

    /// One indicator per connected component of the graph.
    pub fn components(g: &Graph) -> Self {
        let comps = g.components();
        let basis = comps
            .iter()
            .map(|c| {
                let mut v = vec![0.0; g.n()];
                c.iter().for_each(|&i| v[i] = 1.0);
                v
            })
            .collect();
        Self {
            basis,
            pins: comps.iter().map(|c| c[0]).collect(),
        }
    }
}

/// Marginal variances and generalized log-determinant of an intrinsic
/// structure `Q` under the constraint `Nᵀx = 0`.
///
/// Pinning the nodes `K` to zero gives a proper GMRF with covariance `Σ₀`
/// (zero on `K`). Every constrained vector is `M x₀` with
/// `M = I − N(NᵀN)⁻¹Nᵀ`, so the constrained covariance is `M Σ₀ Mᵀ`, the
/// Moore–Penrose inverse of `Q`. No jitter is involved.
pub fn generalized_variances(q: &SparseSym, null: &NullSpace) -> Result<(Vec<f64>, f64)> {
    let n = q.n();
    let k = null.dim();
    if k == 0 {
        let f = factorize(q, 0.0)?;
        return Ok((f.partial_inverse().diag(), f.logdet()));
    }
    let mut free = vec![usize::MAX; n];
    let mut nfree = 0;
    for (i, slot) in free.iter_mut().enumerate() {
        if !null.pins.contains(&i) {
            *slot = nfree;
            nfree += 1;
        }
    }
    let t: Vec<_> = q
        .iter()
        .filter(|&(i, j, _)| free[i] != usize::MAX && free[j] != usize::MAX)
        .map(|(i, j, v)| (free[i], free[j], v))
        .collect();
    let (sigma0, logdet_free, b) = if nfree == 0 {
        (vec![0.0; n], 0.0, DMatrix::zeros(n, k))
    } else {
        let f = factorize(&SparseSym::from_triplets(nfree, &t)?, 0.0)?;
        let d = f.partial_inverse().diag();
        let mut sigma0 = vec![0.0; n];
        for i in 0..n {
            if free[i] != usize::MAX {
                sigma0[i] = d[free[i]];
            }
        }
        // B = Σ₀ N, n × k
        let mut b = DMatrix::zeros(n, k);
        for (a, v) in null.basis.iter().enumerate() {
            let rhs: Vec<f64> = (0..n)
                .filter(|&i| free[i] != usize::MAX)
                .map(|i| v[i])
                .collect();
            let sol = f.solve(&rhs)?;
            for i in 0..n {
                if free[i] != usize::MAX {
                    b[(i, a)] = sol[free[i]];
                }
            }
        }
        (sigma0, f.logdet(), b)
    };
    let nmat = DMatrix::from_fn(n, k, |i, a| null.basis[a][i]);
    let ntn = nmat.transpose() * &nmat;
    let ntn_inv = ntn
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("null-space basis is rank deficient".into()))?;
    let g = &nmat * &ntn_inv;
    let s = nmat.transpose() * &b;
    let var = (0..n)
        .map(|i| {
            let gi = g.row(i);
            let cross = (gi * b.row(i).transpose())[(0, 0)];
            let quad = (gi * &s * gi.transpose())[(0, 0)];
            (sigma0[i] - 2.0 * cross + quad).max(0.0)
        })
        .collect();
    let nk = DMatrix::from_fn(k, k, |r, a| null.basis[a][null.pins[r]]);
    let det_nk = nk.determinant();
    if det_nk == 0.0 {
        return Err(Error::Domain(
            "pinned nodes do not identify the null space".into(),
        ));
    }
    let logdet = logdet_free + ntn.determinant().ln() - 2.0 * det_nk.abs().ln();
    Ok((var, logdet))
}

/// Geometric mean of the positive entries of `v`.
pub fn geometric_mean(v: &[f64]) -> f64 {
    let pos: Vec<f64> = v.iter().copied().filter(|&x| x > 0.0).collect();
    (pos.iter().map(|x| x.ln()).sum::<f64>() / pos.len() as f64).exp()
}

/// Nonzero eigenvalues of the generalized inverse of `q` (dense).
pub fn generalized_inverse_eigenvalues(q: &SparseSym) -> Vec<f64> {
    let d = q.to_dense();
    let n = q.n();
    let m = DMatrix::from_fn(n, n, |i, j| d[i][j]);
    let eig = m.symmetric_eigen().eigenvalues;
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let mut out: Vec<f64> = eig
        .iter()
        .filter(|&&l| l > 1e-10 * max)
        .map(|l| 1.0 / l)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}
