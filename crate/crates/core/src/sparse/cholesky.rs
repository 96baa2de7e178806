use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ordering::minimum_degree;
use super::takahashi::{self, PartialInverse};
use super::SparseSym;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Relative pivot tolerance: a pivot must exceed this times the largest diagonal.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Ordering and nonzero pattern of the Cholesky factor for a fixed sparsity
/// pattern. Computed once and shared by every numeric factorization of
/// matrices with that pattern.
#[derive(Debug)]
pub struct Symbolic {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    /// Pattern the analysis was made for (lower CSC of the original matrix).
    src_colptr: Vec<usize>,
    src_rowidx: Vec<usize>,
    /// Upper triangle of `P Q Pᵀ` by columns.
    cp: Vec<usize>,
    ci: Vec<usize>,
    /// Position in `ci` of each stored entry of the source matrix.
    src_to_c: Vec<usize>,
    /// Column pointers and row indices of `L` (diagonal first in each column).
    lp: Vec<usize>,
    li: Vec<usize>,
    /// Nonzero pattern of each row of `L` (excluding the diagonal) in topological order.
    rp: Vec<usize>,
    ri: Vec<usize>,
}

impl Symbolic {
    pub fn analyze(q: &SparseSym) -> Self {
        let perm = minimum_degree(q);
        Self::with_ordering(q, perm)
    }

    /// Analysis under a caller-supplied ordering (`perm[k]` = original index).
    pub fn with_ordering(q: &SparseSym, perm: Vec<usize>) -> Self {
        let n = q.n();
        assert_eq!(perm.len(), n, "ordering length mismatch");
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }

        // upper triangle of the permuted matrix
        let mut counts = vec![0usize; n];
        for (i, j, _) in q.iter() {
            counts[pinv[i].max(pinv[j])] += 1;
        }
        let mut cp = vec![0usize; n + 1];
        for k in 0..n {
            cp[k + 1] = cp[k] + counts[k];
        }
        let mut fill = cp.clone();
        let mut ci = vec![0usize; q.nnz()];
        let mut src_to_c = vec![0usize; q.nnz()];
        for (p, (i, j, _)) in q.iter().enumerate() {
            let (a, b) = (pinv[i], pinv[j]);
            let (r, c) = if a <= b { (a, b) } else { (b, a) };
            ci[fill[c]] = r;
            src_to_c[p] = fill[c];
            fill[c] += 1;
        }

        // elimination tree
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &row in &ci[cp[k]..cp[k + 1]] {
                let mut i = row;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        // row patterns of L via elimination-tree reach
        let mut mark = vec![NONE; n];
        let mut stack = Vec::new();
        let mut rp = vec![0usize];
        let mut ri = Vec::new();
        let mut colcount = vec![1usize; n];
        let mut row = Vec::new();
        for k in 0..n {
            mark[k] = k;
            row.clear();
            for &r in &ci[cp[k]..cp[k + 1]] {
                let mut i = r;
                stack.clear();
                while mark[i] != k {
                    stack.push(i);
                    mark[i] = k;
                    i = parent[i];
                }
                row.extend_from_slice(&stack);
            }
            // etree parents have larger indices, so ascending order is topological
            row.sort_unstable();
            for &i in &row {
                colcount[i] += 1;
            }
            ri.extend_from_slice(&row);
            rp.push(ri.len());
        }

        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + colcount[k];
        }
        let mut li = vec![0usize; lp[n]];
        let mut next = lp.clone();
        for k in 0..n {
            li[next[k]] = k;
            next[k] += 1;
        }
        for k in 0..n {
            for &i in &ri[rp[k]..rp[k + 1]] {
                li[next[i]] = k;
                next[i] += 1;
            }
        }

        Self {
            n,
            perm,
            pinv,
            src_colptr: q.colptr().to_vec(),
            src_rowidx: q.rowidx().to_vec(),
            cp,
            ci,
            src_to_c,
            lp,
            li,
            rp,
            ri,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn pinv(&self) -> &[usize] {
        &self.pinv
    }

    pub fn nnz_l(&self) -> usize {
        self.li.len()
    }

    pub(crate) fn lp(&self) -> &[usize] {
        &self.lp
    }

    pub(crate) fn li(&self) -> &[usize] {
        &self.li
    }

    fn matches(&self, q: &SparseSym) -> bool {
        q.n() == self.n && q.colptr() == self.src_colptr && q.rowidx() == self.src_rowidx
    }

    /// Numeric factorization of `q + jitter·I`.
    pub fn factor(self: &Arc<Self>, q: &SparseSym, jitter: f64) -> Result<CholFactor> {
        if !self.matches(q) {
            return Err(Error::Domain(
                "matrix pattern differs from the symbolic analysis".into(),
            ));
        }
        if !(jitter >= 0.0) {
            return Err(Error::Domain(format!(
                "jitter must be nonnegative, got {jitter}"
            )));
        }
        let n = self.n;
        let mut cx = vec![0.0; self.ci.len()];
        for (p, &v) in q.values().iter().enumerate() {
            cx[self.src_to_c[p]] += v;
        }
        let max_diag = q
            .diag()
            .iter()
            .fold(0.0_f64, |m, &d| m.max(d.abs() + jitter));
        let tol = PIVOT_TOLERANCE * max_diag.max(f64::MIN_POSITIVE);

        let lp = &self.lp;
        let li = &self.li;
        let mut lx = vec![0.0; li.len()];
        let mut fillp: Vec<usize> = lp[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut logdet = 0.0;

        for k in 0..n {
            for p in self.cp[k]..self.cp[k + 1] {
                x[self.ci[p]] += cx[p];
            }
            let mut d = x[k] + jitter;
            x[k] = 0.0;
            for &i in &self.ri[self.rp[k]..self.rp[k + 1]] {
                let lki = x[i] / lx[lp[i]];
                x[i] = 0.0;
                for p in lp[i] + 1..fillp[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                lx[fillp[i]] = lki;
                fillp[i] += 1;
            }
            if !(d > tol) {
                return Err(Error::NotPositiveDefinite {
                    pivot: self.perm[k],
                });
            }
            let lkk = d.sqrt();
            lx[fillp[k]] = lkk;
            fillp[k] += 1;
            logdet += 2.0 * lkk.ln();
        }

        Ok(CholFactor {
            symbolic: Arc::clone(self),
            lx,
            logdet,
            jitter,
        })
    }
}

/// Permuted Cholesky factor `P (Q + jitter·I) Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholFactor {
    symbolic: Arc<Symbolic>,
    lx: Vec<f64>,
    logdet: f64,
    jitter: f64,
}

/// Analyze and factorize `q + jitter·I` in one step.
pub fn factorize(q: &SparseSym, jitter: f64) -> Result<CholFactor> {
    Arc::new(Symbolic::analyze(q)).factor(q, jitter)
}

impl CholFactor {
    pub fn n(&self) -> usize {
        self.symbolic.n
    }

    /// `log det(Q + jitter·I) = 2 Σ log L_ii`.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn symbolic(&self) -> &Arc<Symbolic> {
        &self.symbolic
    }

    pub(crate) fn lx(&self) -> &[f64] {
        &self.lx
    }

    /// Entries of `L` as `(row, col, value)` in the permuted ordering.
    pub fn l_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let s = &self.symbolic;
        (0..s.n).flat_map(move |j| (s.lp[j]..s.lp[j + 1]).map(move |p| (s.li[p], j, self.lx[p])))
    }

    fn lower_solve_in_place(&self, y: &mut [f64]) {
        let s = &self.symbolic;
        for j in 0..s.n {
            let p0 = s.lp[j];
            y[j] /= self.lx[p0];
            let yj = y[j];
            for p in p0 + 1..s.lp[j + 1] {
                y[s.li[p]] -= self.lx[p] * yj;
            }
        }
    }

    fn upper_solve_in_place(&self, y: &mut [f64]) {
        let s = &self.symbolic;
        for j in (0..s.n).rev() {
            let p0 = s.lp[j];
            let mut acc = y[j];
            for p in p0 + 1..s.lp[j + 1] {
                acc -= self.lx[p] * y[s.li[p]];
            }
            y[j] = acc / self.lx[p0];
        }
    }

    /// Solves `(Q + jitter·I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let perm = &self.symbolic.perm;
        let mut y: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        self.lower_solve_in_place(&mut y);
        self.upper_solve_in_place(&mut y);
        let mut x = vec![0.0; n];
        for (k, &i) in perm.iter().enumerate() {
            x[i] = y[k];
        }
        Ok(x)
    }

    /// Selected inverse on the pattern of `L + Lᵀ` (Takahashi recursion).
    pub fn partial_inverse(&self) -> PartialInverse {
        takahashi::partial_inverse(self)
    }

    /// Draws `mean + L⁻ᵀ z` (un-permuted), an exact draw from `N(mean, (Q + jitter·I)⁻¹)`.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let n = self.n();
        if mean.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mean.len(),
            });
        }
        let mut w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        self.upper_solve_in_place(&mut w);
        let mut x = mean.to_vec();
        for (k, &i) in self.symbolic.perm.iter().enumerate() {
            x[i] += w[k];
        }
        Ok(x)
    }

    /// [`CholFactor::sample`] with a fresh ChaCha8 stream seeded by `seed`.
    pub fn sample_canonical(&self, mean: &[f64], seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample(mean, &mut rng)
    }
}
