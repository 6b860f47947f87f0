//! Projection of observer estimates onto a convex set in ξ-coordinates.
//!
//! Whenever `ξ̂ = H(x̂, z)` sits on a face of `C_ξ(z)` and the update
//! points outward, the outward component of `ξ̂'` is removed in the
//! metric `Γ`:
//!
//! ```text
//! P(ξ̂') = ξ̂' − Γ·N·(Nᵀξ̂' + N_zᵀż) / (NᵀΓN)
//! ```
//!
//! and the result is pulled back to plant coordinates through
//! `[∂H/∂x̂]⁻¹`. With `Γ = (S E′)⁻¹(S E′)⁻ᵀ` this is an orthogonal
//! projection in ζ = S E′ ξ coordinates, so the observer Lyapunov function
//! `ζ̃ᵀζ̃` can only decrease faster than without projection.

use thiserror::Error;

use crate::matkit::{dot, lu_solve, MatError, Matrix};
use crate::observer::{evaluate_observer, GainSet, ObserverError};
use crate::plant::Plant;

/// Smallest admissible `NᵀΓN` on an active face.
pub const MIN_NORMAL_WEIGHT: f64 = 1e-14;

/// Relative width of the band around each face that counts as boundary.
pub const DEFAULT_ACTIVATION_BAND: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("empty box: lower bound {lo} is not below upper bound {hi} in coordinate {coordinate}")]
    EmptyBox { coordinate: usize, lo: f64, hi: f64 },
    #[error("degenerate normal on face {face}: NᵀΓN = {weight:e}")]
    DegenerateNormal { face: usize, weight: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// A convex set `{ξ : bᵢ(ξ, z) ≤ 0 for all i}` described by its faces.
pub trait ConvexSet: Send + Sync {
    fn dim(&self) -> usize;

    fn face_count(&self) -> usize;

    /// `bᵢ(ξ, z)`; nonpositive inside.
    fn face_value(&self, face: usize, xi: &[f64], z: &[f64]) -> f64;

    /// `N = ∇_ξ bᵢ`.
    fn grad_xi(&self, face: usize, xi: &[f64], z: &[f64]) -> Vec<f64>;

    /// `N_z = ∇_z bᵢ`.
    fn grad_z(&self, face: usize, xi: &[f64], z: &[f64]) -> Vec<f64>;

    /// Magnitude used to make face tolerances relative.
    fn face_scale(&self, face: usize) -> f64;

    /// Absolute width `δ` of the boundary band of a face.
    fn activation_band(&self, face: usize) -> f64;

    /// A point of the set close to `xi`. Used to repair integration drift.
    fn restore(&self, xi: &[f64], z: &[f64]) -> Vec<f64>;

    /// Largest scaled face value, `maxᵢ bᵢ/scaleᵢ`; positive outside.
    fn max_violation(&self, xi: &[f64], z: &[f64]) -> f64 {
        (0..self.face_count()).map(|i| self.face_value(i, xi, z) / self.face_scale(i)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn contains(&self, xi: &[f64], z: &[f64]) -> bool {
        (0..self.face_count()).all(|i| self.face_value(i, xi, z) <= 0.0)
    }
}

/// Axis-aligned box `lo ≤ ξ ≤ hi`, independent of `z`.
///
/// Faces are ordered `(lower₁, upper₁, lower₂, upper₂, …)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
    chain_len: usize,
    band: f64,
}

pub fn make_box_set(lo: &[f64], hi: &[f64]) -> Result<BoxSet, ProjectionError> {
    BoxSet::new(lo, hi)
}

impl BoxSet {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self, ProjectionError> {
        if lo.len() != hi.len() {
            return Err(ProjectionError::Dimension(format!("box bounds have lengths {} and {}", lo.len(), hi.len())));
        }
        for (j, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            if !(l < h) || !l.is_finite() || !h.is_finite() {
                return Err(ProjectionError::EmptyBox { coordinate: j, lo: l, hi: h });
            }
        }
        Ok(Self { lo: lo.to_vec(), hi: hi.to_vec(), chain_len: 0, band: DEFAULT_ACTIVATION_BAND })
    }

    /// Declares the chain length so that `N_z` has the right size.
    pub fn with_chain_len(mut self, n_u: usize) -> Self {
        self.chain_len = n_u;
        self
    }

    pub fn with_activation_band(mut self, band: f64) -> Self {
        self.band = band;
        self
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    fn bound(&self, face: usize) -> f64 {
        let j = face / 2;
        if face.is_multiple_of(2) {
            self.lo[j]
        } else {
            self.hi[j]
        }
    }
}

impl ConvexSet for BoxSet {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn face_count(&self) -> usize {
        2 * self.lo.len()
    }

    fn face_value(&self, face: usize, xi: &[f64], _z: &[f64]) -> f64 {
        let j = face / 2;
        if face.is_multiple_of(2) {
            self.lo[j] - xi[j]
        } else {
            xi[j] - self.hi[j]
        }
    }

    fn grad_xi(&self, face: usize, _xi: &[f64], _z: &[f64]) -> Vec<f64> {
        let mut n = vec![0.0; self.lo.len()];
        n[face / 2] = if face.is_multiple_of(2) { -1.0 } else { 1.0 };
        n
    }

    fn grad_z(&self, _face: usize, _xi: &[f64], _z: &[f64]) -> Vec<f64> {
        vec![0.0; self.chain_len]
    }

    fn face_scale(&self, face: usize) -> f64 {
        self.bound(face).abs().max(1.0)
    }

    fn activation_band(&self, face: usize) -> f64 {
        self.band * self.face_scale(face)
    }

    fn restore(&self, xi: &[f64], _z: &[f64]) -> Vec<f64> {
        xi.iter().zip(self.lo.iter().zip(&self.hi)).map(|(&v, (&l, &h))| v.clamp(l, h)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionOutcome {
    /// Projected `ξ̂'`.
    pub xidot: Vec<f64>,
    /// Faces whose correction was applied, in application order.
    pub active_faces: Vec<usize>,
    /// `Nᵀξ̂'ᴾ + N_zᵀż` right after each active face's correction.
    pub tangency_residuals: Vec<f64>,
}

impl ProjectionOutcome {
    pub fn is_active(&self) -> bool {
        !self.active_faces.is_empty()
    }
}

/// Applies the Γ-weighted projection face by face in ascending order.
///
/// A face is active when `bᵢ(ξ̂, z) ≥ −δᵢ` and its outward rate
/// `Nᵀξ̂' + N_zᵀż` is nonnegative; the rate is re-evaluated after each
/// earlier correction.
pub fn project_xidot(
    set: &dyn ConvexSet,
    gamma: &Matrix,
    xi_hat: &[f64],
    xidot_hat: &[f64],
    z: &[f64],
    zdot: &[f64],
) -> Result<ProjectionOutcome, ProjectionError> {
    let n = xi_hat.len();
    if xidot_hat.len() != n || gamma.dims() != (n, n) || set.dim() != n {
        return Err(ProjectionError::Dimension(format!(
            "ξ̂ has {n} entries, ξ̂' {}, Γ {:?}, set {}",
            xidot_hat.len(),
            gamma.dims(),
            set.dim()
        )));
    }
    let mut xidot = xidot_hat.to_vec();
    let mut active_faces = Vec::new();
    let mut tangency_residuals = Vec::new();

    for face in 0..set.face_count() {
        if set.face_value(face, xi_hat, z) < -set.activation_band(face) {
            continue;
        }
        let normal = set.grad_xi(face, xi_hat, z);
        let normal_z = set.grad_z(face, xi_hat, z);
        let rate = dot(&normal, &xidot) + dot(&normal_z, zdot);
        if !(rate >= 0.0) {
            continue;
        }
        let gn = gamma.mul_vec(&normal);
        let weight = dot(&normal, &gn);
        if !(weight >= MIN_NORMAL_WEIGHT) {
            return Err(ProjectionError::DegenerateNormal { face, weight });
        }
        let k = rate / weight;
        for (d, g) in xidot.iter_mut().zip(&gn) {
            *d -= g * k;
        }
        active_faces.push(face);
        tangency_residuals.push(dot(&normal, &xidot) + dot(&normal_z, zdot));
    }

    Ok(ProjectionOutcome { xidot, active_faces, tangency_residuals })
}

/// Result of evaluating the projected observer at one point.
#[derive(Clone, Debug)]
pub struct ProjectedEstimate {
    /// Projected `x̂'ᴾ`.
    pub xhatdot: Vec<f64>,
    /// Unprojected observer right-hand side.
    pub raw_xhatdot: Vec<f64>,
    pub xi_hat: Vec<f64>,
    /// Unprojected `ξ̂' = ∂H/∂x̂·x̂' + ∂H/∂z·ż`.
    pub xidot_hat: Vec<f64>,
    pub outcome: ProjectionOutcome,
}

/// Projected observer right-hand side in plant coordinates.
///
/// When no face is active the observer right-hand side is returned
/// unchanged.
#[allow(clippy::too_many_arguments)]
pub fn project_xhatdot(
    plant: &dyn Plant,
    set: &dyn ConvexSet,
    gains: &GainSet,
    xhat: &[f64],
    z: &[f64],
    zdot: &[f64],
    u: f64,
    y_measured: f64,
) -> Result<ProjectedEstimate, ProjectionError> {
    let eval = evaluate_observer(plant, gains, xhat, z, u, y_measured)?;
    let raw = eval.rhs();
    let jac_z = plant.jacobian_z(xhat, z).map_err(ObserverError::from)?;
    let xi_hat = plant.observability_map(xhat, z);
    let mut xidot_hat = eval.jac_x.mul_vec(&raw);
    let chain_term = jac_z.mul_vec(zdot);
    for (a, b) in xidot_hat.iter_mut().zip(&chain_term) {
        *a += b;
    }

    let outcome = project_xidot(set, &gains.gamma, &xi_hat, &xidot_hat, z, zdot)?;
    let xhatdot = if outcome.is_active() {
        let target: Vec<f64> = outcome.xidot.iter().zip(&chain_term).map(|(p, c)| p - c).collect();
        eval.jac_lu.solve(&target)
    } else {
        raw.clone()
    };
    Ok(ProjectedEstimate { xhatdot, raw_xhatdot: raw, xi_hat, xidot_hat, outcome })
}

/// `ζ = S·E′·ξ`.
pub fn zeta_transform(gains: &GainSet, xi: &[f64]) -> Vec<f64> {
    gains.s_eprime.mul_vec(xi)
}

/// `ξ = (S·E′)⁻¹·ζ`.
pub fn zeta_inverse(gains: &GainSet, zeta: &[f64]) -> Result<Vec<f64>, MatError> {
    lu_solve(&gains.s_eprime, zeta)
}

/// Face normal in ζ-coordinates, `N′ = (S·E′)⁻ᵀ·N`, i.e. the gradient of
/// `b((S E′)⁻¹ζ, z)`.
pub fn zeta_normal(gains: &GainSet, normal: &[f64]) -> Result<Vec<f64>, MatError> {
    lu_solve(&gains.s_eprime.transpose(), normal)
}

/// `N′ᵀζ̇ᴾ + N_zᵀż` for a projected ξ-rate.
pub fn zeta_tangency_residual(
    gains: &GainSet,
    normal: &[f64],
    normal_z: &[f64],
    xidot_projected: &[f64],
    zdot: &[f64],
) -> Result<f64, MatError> {
    let n_prime = zeta_normal(gains, normal)?;
    let zeta_dot = zeta_transform(gains, xidot_projected);
    Ok(dot(&n_prime, &zeta_dot) + dot(normal_z, zdot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::design_gains;

    #[test]
    fn box_membership() {
        let b = make_box_set(&[0.01, -3.42], &[3.61, 3.42]).unwrap();
        assert_eq!(b.face_count(), 4);
        assert!(b.contains(&[1.0, -2.02], &[]));
        assert!((0..4).all(|i| b.face_value(i, &[1.0, -2.02], &[]) < 0.0));
        let outside = [0.005, 0.0];
        assert!(!b.contains(&outside, &[]));
        assert!(b.face_value(0, &outside, &[]) > 0.0);
        assert!((1..4).all(|i| b.face_value(i, &outside, &[]) < 0.0));
        assert_eq!(b.grad_xi(0, &outside, &[]), vec![-1.0, 0.0]);
        assert_eq!(b.grad_xi(3, &outside, &[]), vec![0.0, 1.0]);
        assert_eq!(b.restore(&[0.005, 9.0], &[]), vec![0.01, 3.42]);
    }

    #[test]
    fn empty_box_rejected() {
        assert!(matches!(make_box_set(&[0.0, 1.0], &[1.0, 1.0]), Err(ProjectionError::EmptyBox { coordinate: 1, .. })));
        assert!(matches!(make_box_set(&[0.0], &[1.0, 2.0]), Err(ProjectionError::Dimension(_))));
    }

    #[test]
    fn interior_and_inward_untouched() {
        let b = make_box_set(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let gamma = Matrix::from_diag(&[0.25, 1.0]);
        let out = project_xidot(&b, &gamma, &[0.0, 0.0], &[5.0, -3.0], &[], &[]).unwrap();
        assert_eq!(out.xidot, vec![5.0, -3.0]);
        assert!(!out.is_active());
        // on the upper ξ₁ face but moving inward
        let out = project_xidot(&b, &gamma, &[1.0, 0.0], &[-2.0, 7.0], &[], &[]).unwrap();
        assert_eq!(out.xidot, vec![-2.0, 7.0]);
    }

    /// Half-plane `(ξ₁ + ξ₂)/√2 ≤ 0`.
    struct Diagonal;

    impl ConvexSet for Diagonal {
        fn dim(&self) -> usize {
            2
        }
        fn face_count(&self) -> usize {
            1
        }
        fn face_value(&self, _f: usize, xi: &[f64], _z: &[f64]) -> f64 {
            (xi[0] + xi[1]) / 2f64.sqrt()
        }
        fn grad_xi(&self, _f: usize, _xi: &[f64], _z: &[f64]) -> Vec<f64> {
            vec![1.0 / 2f64.sqrt(); 2]
        }
        fn grad_z(&self, _f: usize, _xi: &[f64], _z: &[f64]) -> Vec<f64> {
            vec![]
        }
        fn face_scale(&self, _f: usize) -> f64 {
            1.0
        }
        fn activation_band(&self, _f: usize) -> f64 {
            1e-9
        }
        fn restore(&self, xi: &[f64], _z: &[f64]) -> Vec<f64> {
            xi.to_vec()
        }
    }

    #[test]
    fn weighted_projection_golden() {
        let gamma = Matrix::from_diag(&[0.25, 1.0]);
        let out = project_xidot(&Diagonal, &gamma, &[0.0, 0.0], &[1.0, 0.0], &[], &[]).unwrap();
        assert!((out.xidot[0] - 0.8).abs() < 1e-12 && (out.xidot[1] + 0.8).abs() < 1e-12);
        assert_eq!(out.active_faces, vec![0]);
        assert!(out.tangency_residuals[0].abs() < 1e-12);
    }

    #[test]
    fn degenerate_normal() {
        let gamma = Matrix::zeros(2, 2);
        let err = project_xidot(&Diagonal, &gamma, &[0.0, 0.0], &[1.0, 0.0], &[], &[]);
        assert!(matches!(err, Err(ProjectionError::DegenerateNormal { face: 0, .. })));
    }

    #[test]
    fn corner_handles_both_faces() {
        let b = make_box_set(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let gamma = Matrix::from_diag(&[0.5, 2.0]);
        let out = project_xidot(&b, &gamma, &[1.0, 1.0], &[3.0, 4.0], &[], &[]).unwrap();
        assert_eq!(out.active_faces, vec![1, 3]);
        assert_eq!(out.xidot, vec![0.0, 0.0]);
    }

    #[test]
    fn zeta_round_trip() {
        let g = design_gains(&[4.0, 4.0], 0.2).unwrap();
        let xi = [0.3, -1.7];
        let back = zeta_inverse(&g, &zeta_transform(&g, &xi)).unwrap();
        assert!((back[0] - xi[0]).abs() < 1e-12 && (back[1] - xi[1]).abs() < 1e-12);
        assert_eq!(zeta_transform(&g, &[0.0, 0.0]), vec![0.0, 0.0]);
    }
}
