//! Plant abstraction, input-side integrator augmentation and the
//! observability mapping `ξ = H(x, z)`.

use thiserror::Error;

use crate::matkit::{determinant, lu_solve, norm2, MatError, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("map returned a non-finite value at a perturbed point (coordinate {coordinate})")]
    NonFiniteEvaluation { coordinate: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("observability map inversion failed after {iterations} Newton steps (residual {residual:e})")]
    InversionFailed { iterations: usize, residual: f64 },
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// A SISO plant `ẋ = f(x, u)`, `y = h(x, u)` together with its
/// observability mapping.
///
/// `chain_len` is the number `n_u` of integrators placed on the input
/// side. The chain state `z` has that length and the plant input is
/// `u = z₁` (or the new control `v` directly when `n_u = 0`). The map
/// `H(x, z)` returns `[y, ẏ, …, y⁽ⁿ⁻¹⁾]` and must be invertible in `x`
/// on the region of interest.
///
/// Implementations must be pure.
pub trait Plant: Send + Sync {
    fn name(&self) -> &str;

    fn state_dim(&self) -> usize;

    fn chain_len(&self) -> usize;

    fn dynamics(&self, x: &[f64], u: f64) -> Vec<f64>;

    fn output(&self, x: &[f64], u: f64) -> f64;

    fn observability_map(&self, x: &[f64], z: &[f64]) -> Vec<f64>;

    /// `∂H/∂x`, n×n. Defaults to central finite differences.
    fn jacobian_x(&self, x: &[f64], z: &[f64]) -> Result<Matrix, PlantError> {
        fd_jacobian(|xp| self.observability_map(xp, z), x)
    }

    /// `∂H/∂z`, n×n_u. Defaults to central finite differences.
    fn jacobian_z(&self, x: &[f64], z: &[f64]) -> Result<Matrix, PlantError> {
        if z.is_empty() {
            return Ok(Matrix::zeros(self.state_dim(), 0));
        }
        fd_jacobian(|zp| self.observability_map(x, zp), z)
    }

    fn has_analytic_jacobians(&self) -> bool {
        false
    }
}

/// Plant input for the given chain state and new control.
pub fn plant_input(z: &[f64], v: f64) -> f64 {
    z.first().copied().unwrap_or(v)
}

/// Chain derivative `ż = (z₂, …, z_{n_u}, v)`.
pub fn chain_derivative(z: &[f64], v: f64) -> Vec<f64> {
    let mut dz = Vec::with_capacity(z.len());
    if !z.is_empty() {
        dz.extend_from_slice(&z[1..]);
        dz.push(v);
    }
    dz
}

/// The plant augmented with its input-side integrator chain,
/// `χ̇ = f_e(χ) + g_e·v` with `χ = [x; z]`.
#[derive(Clone, Copy)]
pub struct ExtendedSystem<'a> {
    plant: &'a dyn Plant,
}

pub fn extend_system(plant: &dyn Plant) -> ExtendedSystem<'_> {
    ExtendedSystem { plant }
}

impl<'a> ExtendedSystem<'a> {
    pub fn plant(&self) -> &'a dyn Plant {
        self.plant
    }

    pub fn dim(&self) -> usize {
        self.plant.state_dim() + self.plant.chain_len()
    }

    pub fn rhs(&self, chi: &[f64], v: f64) -> Vec<f64> {
        let n = self.plant.state_dim();
        assert_eq!(chi.len(), self.dim(), "extended state length");
        let (x, z) = chi.split_at(n);
        let mut out = self.plant.dynamics(x, plant_input(z, v));
        out.extend(chain_derivative(z, v));
        out
    }
}

/// Brunovsky triple `(A_c, B_c, C_c)` of dimension n.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForms {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl CanonicalForms {
    pub fn new(n: usize) -> Self {
        let mut a = Matrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        if n > 0 {
            b[n - 1] = 1.0;
            c[0] = 1.0;
        }
        Self { a, b, c }
    }

    /// `A_c − g·C_c` for an injection vector `g`.
    pub fn output_injection(&self, g: &[f64]) -> Matrix {
        let mut m = self.a.clone();
        for (i, gi) in g.iter().enumerate() {
            m[(i, 0)] -= gi;
        }
        m
    }

    /// `A_c − B_c·k` for a state-feedback row `k`.
    pub fn state_feedback(&self, k: &[f64]) -> Matrix {
        let n = self.b.len();
        let mut m = self.a.clone();
        for (j, kj) in k.iter().enumerate() {
            m[(n - 1, j)] -= kj;
        }
        m
    }
}

/// Central-difference Jacobian with per-coordinate step
/// `hᵢ = max(1e-6, 1e-6·|pointᵢ|)`.
pub fn fd_jacobian<F>(map: F, point: &[f64]) -> Result<Matrix, PlantError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let cols = point.len();
    let mut probe = point.to_vec();
    let mut jac: Option<Matrix> = None;
    for j in 0..cols {
        let h = (1e-6 * point[j].abs()).max(1e-6);
        probe[j] = point[j] + h;
        let plus = map(&probe);
        probe[j] = point[j] - h;
        let minus = map(&probe);
        probe[j] = point[j];
        if plus.iter().chain(&minus).any(|v| !v.is_finite()) {
            return Err(PlantError::NonFiniteEvaluation { coordinate: j });
        }
        if plus.len() != minus.len() {
            return Err(PlantError::Dimension("map output length changed".into()));
        }
        let m = jac.get_or_insert_with(|| Matrix::zeros(plus.len(), cols));
        for i in 0..plus.len() {
            m[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac.unwrap_or_else(|| Matrix::zeros(map(point).len(), 0)))
}

/// `det(∂H/∂x)` at `(x, z)`. Values near zero mark the edge of the
/// observable region.
pub fn check_observability(plant: &dyn Plant, x: &[f64], z: &[f64]) -> Result<f64, PlantError> {
    Ok(determinant(&plant.jacobian_x(x, z)?))
}

/// Newton solve of `H(x, z) = ξ` for `x`, starting from `guess`.
///
/// Used to pull an estimate back after its image has been moved in
/// ξ-coordinates; the guess must already be on the intended branch.
pub fn invert_observability(plant: &dyn Plant, xi: &[f64], z: &[f64], guess: &[f64]) -> Result<Vec<f64>, PlantError> {
    const MAX_ITERS: usize = 50;
    let tol = 1e-14 * (1.0 + norm2(xi));
    let mut x = guess.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let r: Vec<f64> = plant.observability_map(&x, z).iter().zip(xi).map(|(h, t)| h - t).collect();
        residual = norm2(&r);
        if residual <= tol {
            return Ok(x);
        }
        let step = lu_solve(&plant.jacobian_x(&x, z)?, &r)?;
        for (xi_, s) in x.iter_mut().zip(&step) {
            *xi_ -= s;
        }
        if norm2(&step) <= 1e-15 * (1.0 + norm2(&x)) {
            return Ok(x);
        }
    }
    if residual <= 1e-10 * (1.0 + norm2(xi)) {
        return Ok(x);
    }
    Err(PlantError::InversionFailed { iterations: MAX_ITERS, residual })
}
