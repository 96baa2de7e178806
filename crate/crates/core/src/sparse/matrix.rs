use crate::error::{Error, Result};

/// Symmetric matrix stored as its lower triangle in compressed-column form.
///
/// Row indices within a column are strictly increasing and the diagonal entry
/// is always present (it is the first entry of each column).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets. Entries from either triangle are
    /// accepted and folded onto the lower triangle; duplicates are summed.
    /// Missing diagonal entries are inserted as explicit zeros.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (j, col) in cols.iter_mut().enumerate() {
            col.push((j, 0.0));
        }
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: i.max(j) + 1,
                });
            }
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite matrix entry at ({i}, {j})"
                )));
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            cols[c].push((r, v));
        }
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowidx = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        for mut col in cols {
            col.sort_by_key(|&(r, _)| r);
            let mut last = usize::MAX;
            for (r, v) in col {
                if r == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    rowidx.push(r);
                    values.push(v);
                    last = r;
                }
            }
            colptr.push(rowidx.len());
        }
        Ok(Self {
            n,
            colptr,
            rowidx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            n,
            colptr: (0..=n).collect(),
            rowidx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate().take(i + 1) {
                if v != 0.0 || i == j {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterates stored lower-triangle entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowidx[p], j, self.values[p]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let rows = &self.rowidx[self.colptr[c]..self.colptr[c + 1]];
        match rows.binary_search(&r) {
            Ok(k) => self.values[self.colptr[c] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.values[self.colptr[j]]).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `y = Q x` using both triangles.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "mul_vec dimension mismatch");
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowidx[p];
                let v = self.values[p];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.n])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.iter() {
            a[i][j] = v;
            a[j][i] = v;
        }
        a
    }

    /// Block-diagonal concatenation.
    pub fn block_diag(blocks: &[&SparseSym]) -> Self {
        let n = blocks.iter().map(|b| b.n).sum();
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowidx = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        let mut offset = 0;
        for b in blocks {
            for j in 0..b.n {
                for p in b.colptr[j]..b.colptr[j + 1] {
                    rowidx.push(b.rowidx[p] + offset);
                    values.push(b.values[p]);
                }
                colptr.push(rowidx.len());
            }
            offset += b.n;
        }
        Self {
            n,
            colptr,
            rowidx,
            values,
        }
    }
}

/// General sparse matrix in compressed-row form (used for design matrices).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    rowptr: Vec<usize>,
    colidx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from triplets; duplicates are summed and exact zeros are kept.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            if i >= nrows {
                return Err(Error::DimensionMismatch {
                    expected: nrows,
                    found: i + 1,
                });
            }
            if j >= ncols {
                return Err(Error::DimensionMismatch {
                    expected: ncols,
                    found: j + 1,
                });
            }
            rows[i].push((j, v));
        }
        let mut rowptr = vec![0];
        let mut colidx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last = usize::MAX;
            for (c, v) in row {
                if c == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    colidx.push(c);
                    values.push(v);
                    last = c;
                }
            }
            rowptr.push(colidx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            rowptr,
            colidx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.colidx.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.rowptr[i]..self.rowptr[i + 1];
        (&self.colidx[r.clone()], &self.values[r])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.rowptr[i]..self.rowptr[i + 1]).map(move |p| (i, self.colidx[p], self.values[p]))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "mul_vec dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows, "tr_mul_vec dimension mismatch");
        let mut out = vec![0.0; self.ncols];
        for (i, j, a) in self.iter() {
            out[j] += a * y[i];
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            a[i][j] += v;
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_fold_to_lower_and_sum() {
        let q = SparseSym::from_triplets(2, &[(0, 1, 1.0), (1, 0, 2.0), (0, 0, 4.0)]).unwrap();
        assert_eq!(q.get(1, 0), 3.0);
        assert_eq!(q.get(0, 1), 3.0);
        assert_eq!(q.get(1, 1), 0.0);
        assert_eq!(q.nnz(), 3);
    }

    #[test]
    fn mul_vec_uses_both_triangles() {
        let q = SparseSym::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        assert_eq!(q.mul_vec(&[1.0, 0.0]), vec![2.0, -1.0]);
        assert_eq!(q.quad_form(&[1.0, 1.0]), 2.0);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(SparseSym::from_triplets(2, &[(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 5, 1.0)]).is_err());
    }
}
