use super::{sym_eigen, Lu, MatError, Matrix};

const PD_TOL: f64 = 1e-12;

/// Solves `P·A + Aᵀ·P = −I` for symmetric `P`.
///
/// The `n(n+1)/2` upper-triangular unknowns of `P` are stacked into one
/// dense linear system. A non-Hurwitz `A` shows up either as a singular
/// system or as a solution that is not positive definite; both are
/// reported as [`MatError::NotHurwitz`].
pub fn solve_lyapunov(a: &Matrix) -> Result<Matrix, MatError> {
    if !a.is_square() {
        return Err(MatError::NotSquare(a.dims()));
    }
    if !a.is_finite() {
        return Err(MatError::NonFinite);
    }
    let n = a.rows();
    let m = n * (n + 1) / 2;
    let idx = |i: usize, j: usize| {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        // row-major packing of the upper triangle
        r * n - r * (r + 1) / 2 + c
    };

    let mut sys = Matrix::zeros(m, m);
    let mut rhs = vec![0.0; m];
    for i in 0..n {
        for j in i..n {
            let row = idx(i, j);
            for k in 0..n {
                // (P·A)_ij = Σ_k P_ik A_kj
                sys[(row, idx(i, k))] += a[(k, j)];
                // (Aᵀ·P)_ij = Σ_k A_ki P_kj
                sys[(row, idx(k, j))] += a[(k, i)];
            }
            if i == j {
                rhs[row] = -1.0;
            }
        }
    }

    let sol = Lu::factor(&sys).map_err(|_| MatError::NotHurwitz { lambda_min: f64::NAN })?.solve(&rhs);
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = sol[idx(i, j)];
        }
    }
    if !p.is_finite() {
        return Err(MatError::NotHurwitz { lambda_min: f64::NAN });
    }
    let lambda_min = sym_eigen(&p)?.min();
    if lambda_min <= PD_TOL * p.frobenius_norm() {
        return Err(MatError::NotHurwitz { lambda_min });
    }
    Ok(p)
}

/// Frobenius norm of `P·A + Aᵀ·P + I`.
pub fn lyapunov_residual(a: &Matrix, p: &Matrix) -> f64 {
    let n = a.rows();
    p.matmul(a).add(&a.transpose().matmul(p)).add(&Matrix::identity(n)).frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar() {
        let p = solve_lyapunov(&Matrix::from_rows(&[[-0.5]])).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled() {
        let p = solve_lyapunov(&Matrix::from_diag(&[-1.0, -2.0])).unwrap();
        let expect = Matrix::from_diag(&[0.5, 0.25]);
        assert!(p.sub(&expect).frobenius_norm() < 1e-15);
    }

    #[test]
    fn observer_error_matrix() {
        // A_c - L·C_c with L = [4, 4]
        let a = Matrix::from_rows(&[[-4.0, 1.0], [-4.0, 0.0]]);
        let p = solve_lyapunov(&a).unwrap();
        let expect = Matrix::from_rows(&[[0.625, -0.5], [-0.5, 0.65625]]);
        assert!(p.sub(&expect).frobenius_norm() < 1e-12, "{p:?}");
        assert!(lyapunov_residual(&a, &p) <= 1e-10);
    }

    #[test]
    fn unstable_rejected() {
        assert!(matches!(solve_lyapunov(&Matrix::from_diag(&[1.0, -1.0])), Err(MatError::NotHurwitz { .. })));
        // purely imaginary poles: the vectorized system is singular
        let osc = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]);
        assert!(matches!(solve_lyapunov(&osc), Err(MatError::NotHurwitz { .. })));
    }
}
