//! Small dense linear algebra: LU solves, symmetric eigendecomposition,
//! symmetric square roots and continuous Lyapunov equations.
//!
//! Everything here works on matrices of dimension ≤ ~10 and favours
//! straightforward algorithms over blocked or iterative ones.

mod eigen;
mod lu;
mod lyapunov;
mod matrix;

pub use eigen::{sym_eigen, sym_sqrt, SymEigen};
pub use lu::{determinant, inverse, lu_solve, Lu, PIVOT_TOL};
pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use matrix::{dot, norm2, Matrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("matrix is singular (pivot {pivot:e} in column {column})")]
    SingularMatrix { pivot: f64, column: usize },
    #[error("matrix is not Hurwitz: Lyapunov solution has λ_min = {lambda_min:e}")]
    NotHurwitz { lambda_min: f64 },
    #[error("matrix is not positive definite (λ_min = {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("expected a square matrix, got {0:?}")]
    NotSquare((usize, usize)),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("Jacobi iteration did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}
