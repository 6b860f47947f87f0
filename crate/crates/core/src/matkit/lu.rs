use super::{MatError, Matrix};

/// Relative pivot threshold below which a matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// LU factorization with partial pivoting, `P·A = L·U`, stored compactly.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self, MatError> {
        if !a.is_square() {
            return Err(MatError::NotSquare(a.dims()));
        }
        if !a.is_finite() {
            return Err(MatError::NonFinite);
        }
        let n = a.rows();
        let threshold = PIVOT_TOL * a.max_row_norm();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;

        for k in 0..n {
            let (p, pivot_mag) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_mag == 0.0 || pivot_mag < threshold {
                return Err(MatError::SingularMatrix { pivot: pivot_mag, column: k });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                if m != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= m * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            x[i] -= (0..i).map(|j| row[j] * x[j]).sum::<f64>();
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = ((i + 1)..n).map(|j| row[j] * x[j]).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    pub fn determinant(&self) -> f64 {
        self.lu.diag().iter().product::<f64>() * self.sign
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lu.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

/// Solves `A·x = b` by LU with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, MatError> {
    if b.len() != a.rows() {
        return Err(MatError::DimensionMismatch { expected: (a.rows(), 1), found: (b.len(), 1) });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(MatError::NonFinite);
    }
    Ok(Lu::factor(a)?.solve(b))
}

pub fn inverse(a: &Matrix) -> Result<Matrix, MatError> {
    Ok(Lu::factor(a)?.inverse())
}

/// Determinant by Gaussian elimination; exactly singular or numerically
/// rank-deficient inputs give `0.0` instead of an error.
pub fn determinant(a: &Matrix) -> f64 {
    assert!(a.is_square(), "determinant of non-square matrix");
    if a.rows() == 0 {
        return 1.0;
    }
    match Lu::factor(a) {
        Ok(lu) => lu.determinant(),
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let x = lu_solve(&Matrix::identity(2), &[3.0, 4.0]).unwrap();
        assert_eq!(x, vec![3.0, 4.0]);
    }

    #[test]
    fn adjugate_case() {
        // inverse of [[0,-1],[-1,2]] is [[-2,-1],[-1,0]]
        let a = Matrix::from_rows(&[[0.0, -1.0], [-1.0, 2.0]]);
        let x = lu_solve(&a, &[1.0, 0.0]).unwrap();
        assert!((x[0] + 2.0).abs() < 1e-15 && (x[1] + 1.0).abs() < 1e-15, "{x:?}");
        let inv = inverse(&a).unwrap();
        let expect = Matrix::from_rows(&[[-2.0, -1.0], [-1.0, 0.0]]);
        assert!(inv.sub(&expect).frobenius_norm() < 1e-15);
        assert!((determinant(&a) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_is_singular() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(lu_solve(&a, &[1.0, 2.0]), Err(MatError::SingularMatrix { .. })));
        assert_eq!(determinant(&a), 0.0);
        assert!(matches!(lu_solve(&Matrix::zeros(2, 2), &[0.0, 0.0]), Err(MatError::SingularMatrix { .. })));
    }

    #[test]
    fn non_square_and_bad_rhs() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(Lu::factor(&a), Err(MatError::NotSquare((2, 3)))));
        let b = Matrix::identity(2);
        assert!(matches!(lu_solve(&b, &[1.0]), Err(MatError::DimensionMismatch { .. })));
        assert!(matches!(lu_solve(&b, &[1.0, f64::INFINITY]), Err(MatError::NonFinite)));
    }

    #[test]
    fn determinant_with_pivoting() {
        let a = Matrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 3.0]]);
        // expansion along the second row: -1 * det([[2,1],[0,3]]) = -6
        assert!((determinant(&a) + 6.0).abs() < 1e-14);
    }
}
