//! Sparse symmetric linear algebra for GMRF precision matrices.
//!
//! [`SparseSym`] stores the lower triangle of a symmetric matrix in
//! compressed-column form. [`CholFactor`] holds a fill-reducing permuted
//! Cholesky factor `P Q Pᵀ = L Lᵀ` and provides solves, the log-determinant,
//! selected inversion on the pattern of `L` and exact Gaussian sampling.
//! [`constrain_moments`] applies linear constraints `C x = e` to Gaussian
//! moments by conditioning on them (kriging correction).

mod cholesky;
mod constrain;
mod matrix;
mod ordering;
mod takahashi;

pub use cholesky::{factorize, CholFactor, Symbolic};
pub use constrain::{constrain_moments, ConstraintCorrection, Constraints};
pub use matrix::{SparseMatrix, SparseSym};
pub use ordering::minimum_degree;
pub use takahashi::PartialInverse;
