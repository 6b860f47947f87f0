//! Nonlinear observer operating in plant coordinates.
//!
//! The estimate obeys
//!
//! ```text
//! x̂' = f(x̂, z₁) + [∂H/∂x̂]⁻¹ · E⁻¹ · L · (y − h(x̂, z₁))
//! ```
//!
//! with `E = diag(ρ, ρ², …, ρⁿ)`. In ξ-coordinates this is a high-gain
//! observer, but the inverse of `H` is never needed.

use thiserror::Error;

use crate::matkit::{inverse, solve_lyapunov, sym_sqrt, Lu, MatError, Matrix};
use crate::plant::{CanonicalForms, Plant, PlantError};

/// Default bound on `|det ∂H/∂x̂|` below which the estimate is considered
/// to have left the observable region.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObserverError {
    #[error("observer Jacobian is singular (|det ∂H/∂x̂| = {det:e}); estimate left the observable region")]
    JacobianSingular { det: f64 },
    #[error("rho must lie in (0, 1], got {0}")]
    InvalidRho(f64),
    #[error("observer gain vector is empty")]
    EmptyGain,
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// Every matrix the observer and the projection need, derived from one
/// choice of `(L, ρ)`.
#[derive(Clone, Debug)]
pub struct GainSet {
    pub rho: f64,
    pub l: Vec<f64>,
    /// Solution of `P(A_c − L C_c) + (A_c − L C_c)ᵀP = −I`.
    pub p: Matrix,
    /// Symmetric square root of `P`.
    pub s: Matrix,
    /// Diagonal of `E`, `Eᵢᵢ = ρⁱ`.
    pub e: Vec<f64>,
    /// Diagonal of `E′`, `E′ᵢᵢ = ρ^{−(n−i)}`.
    pub e_prime: Vec<f64>,
    /// `S·E′`, the map from ξ- to ζ-coordinates.
    pub s_eprime: Matrix,
    /// Projection metric `(S E′)⁻¹ (S E′)⁻ᵀ`.
    pub gamma: Matrix,
    pub singular_tol: f64,
}

impl GainSet {
    pub fn dim(&self) -> usize {
        self.l.len()
    }

    /// `E⁻¹·L`.
    pub fn scaled_gain(&self) -> Vec<f64> {
        self.l.iter().zip(&self.e).map(|(l, e)| l / e).collect()
    }

    pub fn with_singular_tol(mut self, tol: f64) -> Self {
        self.singular_tol = tol;
        self
    }
}

/// Builds `E`, `E′`, `P`, `S` and `Γ` for the injection gain `l` and
/// scaling `rho`. `A_c − L·C_c` must be Hurwitz.
pub fn design_gains(l: &[f64], rho: f64) -> Result<GainSet, ObserverError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(ObserverError::InvalidRho(rho));
    }
    let n = l.len();
    if n == 0 {
        return Err(ObserverError::EmptyGain);
    }
    let e: Vec<f64> = (1..=n).map(|i| rho.powi(i as i32)).collect();
    let e_prime: Vec<f64> = (1..=n).map(|i| rho.powi(-((n - i) as i32))).collect();

    let a_cl = CanonicalForms::new(n).output_injection(l);
    let p = solve_lyapunov(&a_cl)?;
    let s = sym_sqrt(&p)?;
    let s_eprime = s.matmul(&Matrix::from_diag(&e_prime));
    let inv = inverse(&s_eprime)?;
    let g = inv.matmul(&inv.transpose());
    let gamma = g.add(&g.transpose()).scale(0.5);

    Ok(GainSet { rho, l: l.to_vec(), p, s, e, e_prime, s_eprime, gamma, singular_tol: DEFAULT_SINGULAR_TOL })
}

/// Pieces of one observer evaluation.
#[derive(Clone, Debug)]
pub struct ObserverEval {
    /// `f(x̂, u)`.
    pub drift: Vec<f64>,
    /// `[∂H/∂x̂]⁻¹ E⁻¹ L (y − ŷ)`.
    pub correction: Vec<f64>,
    /// `y − h(x̂, u)`.
    pub innovation: f64,
    pub jac_x: Matrix,
    pub jac_lu: Lu,
}

impl ObserverEval {
    pub fn rhs(&self) -> Vec<f64> {
        self.drift.iter().zip(&self.correction).map(|(a, b)| a + b).collect()
    }
}

/// Factors `∂H/∂x̂` and rejects it when `|det| < tol`.
pub(crate) fn factor_observer_jacobian(jac: &Matrix, tol: f64) -> Result<Lu, ObserverError> {
    match Lu::factor(jac) {
        Ok(lu) if lu.determinant().abs() >= tol => Ok(lu),
        Ok(lu) => Err(ObserverError::JacobianSingular { det: lu.determinant() }),
        Err(MatError::SingularMatrix { .. }) => Err(ObserverError::JacobianSingular { det: 0.0 }),
        Err(e) => Err(e.into()),
    }
}

/// Evaluates the observer at `x̂`. `u` is the plant input (`z₁`, or the
/// control itself when the plant has no integrator chain).
pub fn evaluate_observer(
    plant: &dyn Plant,
    gains: &GainSet,
    xhat: &[f64],
    z: &[f64],
    u: f64,
    y_measured: f64,
) -> Result<ObserverEval, ObserverError> {
    let jac_x = plant.jacobian_x(xhat, z)?;
    let jac_lu = factor_observer_jacobian(&jac_x, gains.singular_tol)?;
    let innovation = y_measured - plant.output(xhat, u);
    let injected: Vec<f64> = gains.scaled_gain().iter().map(|g| g * innovation).collect();
    let correction = jac_lu.solve(&injected);
    Ok(ObserverEval { drift: plant.dynamics(xhat, u), correction, innovation, jac_x, jac_lu })
}

/// Observer right-hand side `x̂'`.
pub fn observer_rhs(
    plant: &dyn Plant,
    gains: &GainSet,
    xhat: &[f64],
    z: &[f64],
    u: f64,
    y_measured: f64,
) -> Result<Vec<f64>, ObserverError> {
    Ok(evaluate_observer(plant, gains, xhat, z, u, y_measured)?.rhs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_matrices() {
        let g = design_gains(&[4.0, 4.0], 1.0).unwrap();
        assert_eq!(g.e, vec![1.0, 1.0]);
        assert_eq!(g.e_prime, vec![1.0, 1.0]);
        let expect = Matrix::from_rows(&[[0.625, -0.5], [-0.5, 0.65625]]);
        assert!(g.p.sub(&expect).frobenius_norm() < 1e-12);

        let g = design_gains(&[4.0, 4.0], 0.5).unwrap();
        assert_eq!(g.e, vec![0.5, 0.25]);
        assert_eq!(g.e_prime, vec![2.0, 1.0]);

        let g = design_gains(&[4.0, 4.0], 0.1).unwrap();
        assert!((g.e[0] - 0.1).abs() < 1e-17 && (g.e[1] - 0.01).abs() < 1e-17);
        assert!((g.e_prime[0] - 10.0).abs() < 1e-14 && g.e_prime[1] == 1.0);
    }

    #[test]
    fn gamma_is_inverse_of_scaled_p() {
        // Γ⁻¹ = (S E′)ᵀ (S E′) = E′ P E′
        let g = design_gains(&[4.0, 4.0], 0.3).unwrap();
        let ep = Matrix::from_diag(&g.e_prime);
        let target = ep.matmul(&g.p).matmul(&ep);
        let prod = g.gamma.matmul(&target);
        assert!(prod.sub(&Matrix::identity(2)).frobenius_norm() < 1e-12);
        assert_eq!(g.gamma.max_abs_asymmetry(), 0.0);
    }

    #[test]
    fn rejects_bad_design() {
        assert!(matches!(design_gains(&[4.0, 4.0], 0.0), Err(ObserverError::InvalidRho(_))));
        assert!(matches!(design_gains(&[4.0, 4.0], 1.5), Err(ObserverError::InvalidRho(_))));
        assert!(matches!(design_gains(&[4.0, 4.0], f64::NAN), Err(ObserverError::InvalidRho(_))));
        assert!(matches!(design_gains(&[-1.0, 1.0], 0.5), Err(ObserverError::Matrix(MatError::NotHurwitz { .. }))));
        assert!(matches!(design_gains(&[], 0.5), Err(ObserverError::EmptyGain)));
    }
}
