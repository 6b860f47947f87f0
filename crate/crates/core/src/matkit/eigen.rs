use super::{MatError, Matrix};

const SYMMETRY_TOL: f64 = 1e-12;
const OFFDIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `M = Q·diag(λ)·Qᵀ` of a real symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthogonal matrix whose columns are the matching eigenvectors.
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    /// Rebuilds `Q·diag(f(λ))·Qᵀ`.
    pub fn compose_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                let qik = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += qik * self.vectors[(j, k)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.compose_with(|l| l)
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps over all `(p, q)` pairs in row order until the off-diagonal
/// Frobenius norm drops to `1e-12·‖M‖_F`.
pub fn sym_eigen(m: &Matrix) -> Result<SymEigen, MatError> {
    if !m.is_square() {
        return Err(MatError::NotSquare(m.dims()));
    }
    if !m.is_finite() {
        return Err(MatError::NonFinite);
    }
    let n = m.rows();
    let scale = m.frobenius_norm();
    let asym = m.max_abs_asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(MatError::NotSymmetric { asymmetry: asym });
    }

    let mut a = m.add(&m.transpose()).scale(0.5);
    let mut v = Matrix::identity(n);
    let tol = OFFDIAG_TOL * scale;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // A ← A·J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                // A ← Jᵀ·A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                // V ← V·J
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > tol {
        return Err(MatError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Principal square root of a symmetric positive-definite matrix.
pub fn sym_sqrt(p: &Matrix) -> Result<Matrix, MatError> {
    let eig = sym_eigen(p)?;
    if eig.min() <= 0.0 {
        return Err(MatError::NotPositiveDefinite { lambda_min: eig.min() });
    }
    let s = eig.compose_with(f64::sqrt);
    Ok(s.add(&s.transpose()).scale(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_and_diagonal() {
        let e = sym_eigen(&Matrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = sym_eigen(&Matrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        // eigenvector for λ=1 is e₂
        assert_eq!(e.vectors.col_vec(0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two() {
        let m = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]);
        let e = sym_eigen(&m).unwrap();
        assert!(close(&e.values, &[1.0, 3.0], 1e-14), "{:?}", e.values);
        assert!(e.reconstruct().sub(&m).frobenius_norm() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(sym_eigen(&m), Err(MatError::NotSymmetric { .. })));
    }

    #[test]
    fn zero_matrix() {
        let e = sym_eigen(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(e.values, vec![0.0, 0.0]);
    }

    #[test]
    fn sqrt_cases() {
        assert_eq!(sym_sqrt(&Matrix::identity(2)).unwrap(), Matrix::identity(2));
        let s = sym_sqrt(&Matrix::from_diag(&[4.0, 9.0])).unwrap();
        assert!(close(s.as_slice(), &[2.0, 0.0, 0.0, 3.0], 1e-15));
        let p = Matrix::from_rows(&[[0.625, -0.5], [-0.5, 0.65625]]);
        let s = sym_sqrt(&p).unwrap();
        assert!(s.matmul(&s).sub(&p).frobenius_norm() <= 1e-10 * p.frobenius_norm());
        assert_eq!(s.max_abs_asymmetry(), 0.0);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let p = Matrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(sym_sqrt(&p), Err(MatError::NotPositiveDefinite { .. })));
    }
}
