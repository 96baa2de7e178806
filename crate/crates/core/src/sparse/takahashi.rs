use std::sync::Arc;

use super::cholesky::{CholFactor, Symbolic};

/// Entries of `Σ = (Q + jitter·I)⁻¹` on the pattern of `L + Lᵀ`.
#[derive(Debug, Clone)]
pub struct PartialInverse {
    symbolic: Arc<Symbolic>,
    /// Same layout as the factor's `L` values (permuted lower triangle).
    sigma: Vec<f64>,
}

/// Takahashi recursion, from the last column backwards:
///
/// `Σ_ij = δ_ij / L_jj² − (1 / L_jj) Σ_{k > j, L_kj ≠ 0} L_kj Σ_ik`, for `i ≥ j`
/// in the pattern of column `j`. Every `Σ_ik` needed lies in the pattern of `L`.
pub(crate) fn partial_inverse(f: &CholFactor) -> PartialInverse {
    let s = f.symbolic();
    let lp = s.lp();
    let li = s.li();
    let lx = f.lx();
    let n = s.n();
    let mut sigma = vec![0.0; li.len()];

    for j in (0..n).rev() {
        let p0 = lp[j];
        let p1 = lp[j + 1];
        let ljj = lx[p0];
        // off-diagonal entries of column j, in decreasing row order
        for q in (p0 + 1..p1).rev() {
            let i = li[q];
            let mut acc = 0.0;
            for p in p0 + 1..p1 {
                let k = li[p];
                acc += lx[p] * lookup(lp, li, &sigma, i, k);
            }
            sigma[q] = -acc / ljj;
        }
        let mut acc = 0.0;
        for p in p0 + 1..p1 {
            acc += lx[p] * sigma[p];
        }
        sigma[p0] = 1.0 / (ljj * ljj) - acc / ljj;
    }

    PartialInverse {
        symbolic: Arc::clone(s),
        sigma,
    }
}

fn position(lp: &[usize], li: &[usize], i: usize, j: usize) -> Option<usize> {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    let rows = &li[lp[c]..lp[c + 1]];
    rows.binary_search(&r).ok().map(|k| lp[c] + k)
}

fn lookup(lp: &[usize], li: &[usize], sigma: &[f64], i: usize, k: usize) -> f64 {
    // closed pattern: (i, k) is always present when both are rows of the same column
    position(lp, li, i, k).map_or(0.0, |p| sigma[p])
}

impl PartialInverse {
    pub fn n(&self) -> usize {
        self.symbolic.n()
    }

    /// `Σ_ij` in the original ordering, or `None` when `(i, j)` is outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let pinv = self.symbolic.pinv();
        position(self.symbolic.lp(), self.symbolic.li(), pinv[i], pinv[j]).map(|p| self.sigma[p])
    }

    /// Marginal variances (diagonal of the inverse) in the original ordering.
    pub fn diag(&self) -> Vec<f64> {
        let lp = self.symbolic.lp();
        let mut d = vec![0.0; self.n()];
        for (k, &i) in self.symbolic.perm().iter().enumerate() {
            d[i] = self.sigma[lp[k]];
        }
        d
    }

    /// All stored entries `(i, j, Σ_ij)` in the original ordering, `i` and `j`
    /// taken from the lower triangle of the permuted pattern.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let lp = self.symbolic.lp();
        let li = self.symbolic.li();
        let perm = self.symbolic.perm();
        (0..self.n()).flat_map(move |j| {
            (lp[j]..lp[j + 1]).map(move |p| (perm[li[p]], perm[j], self.sigma[p]))
        })
    }

    /// `aᵀ Σ a` for a sparse vector whose support lies within one clique of the pattern.
    pub fn quad_form(&self, idx: &[usize], vals: &[f64]) -> Option<f64> {
        let mut acc = 0.0;
        for (a, (&i, &vi)) in idx.iter().zip(vals).enumerate() {
            acc += vi * vi * self.get(i, i)?;
            for (&j, &vj) in idx[a + 1..].iter().zip(&vals[a + 1..]) {
                acc += 2.0 * vi * vj * self.get(i, j)?;
            }
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use crate::sparse::{factorize, SparseSym};

    #[test]
    fn diagonal_inverse() {
        let f = factorize(&SparseSym::diagonal(&[2.0, 4.0]), 0.0).unwrap();
        let s = f.partial_inverse();
        for (got, want) in s.diag().iter().zip([0.5, 0.25]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn tridiagonal_inverse_diagonal() {
        let q = SparseSym::from_dense(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        let s = factorize(&q, 0.0).unwrap().partial_inverse();
        let d = s.diag();
        for (got, want) in d.iter().zip([0.75, 1.0, 0.75]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((s.get(0, 1).unwrap() - 0.5).abs() < 1e-12);
    }
}
