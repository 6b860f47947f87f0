//! The two-state benchmark plant
//!
//! ```text
//! x₁' = x₂
//! x₂' = (1 + x₁)·exp(x₁²) + u − 1
//! y   = (x₂ − 1)²
//! ```
//!
//! which loses observability (and relative degree) on `x₂ = 1`. One input
//! integrator `z₁' = v, u = z₁` makes it feedback linearizable in
//! `x_e = (x₁, x₂, x₃)` with `x₃ = (1 + x₁)exp(x₁²) + z₁ − 1`.
//!
//! Also provides the stabilizing controller, the projection box and the
//! scenario presets used by the CLI and the acceptance suite.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::matkit::{norm2, solve_lyapunov, sym_eigen, MatError, Matrix};
use crate::plant::{CanonicalForms, Plant, PlantError};
use crate::projection::{BoxSet, ProjectionError};
use crate::sim::{Controller, ScenarioConfig};

pub const OBSERVER_GAIN: [f64; 2] = [4.0, 4.0];
pub const FEEDBACK_GAIN: [f64; 3] = [1.0, 3.0, 3.0];
pub const OMEGA: f64 = 0.9;
pub const X0: [f64; 2] = [0.01, 0.2];
pub const Z0: [f64; 1] = [1.01];
pub const XHAT0: [f64; 2] = [0.0, 0.0];

#[derive(Clone, Copy, Debug, Default)]
pub struct ExamplePlant;

pub fn example_plant() -> ExamplePlant {
    ExamplePlant
}

impl Plant for ExamplePlant {
    fn name(&self) -> &str {
        "example"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn chain_len(&self) -> usize {
        1
    }

    fn dynamics(&self, x: &[f64], u: f64) -> Vec<f64> {
        vec![x[1], (1.0 + x[0]) * (x[0] * x[0]).exp() + u - 1.0]
    }

    fn output(&self, x: &[f64], _u: f64) -> f64 {
        (x[1] - 1.0).powi(2)
    }

    fn observability_map(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        let d = x[1] - 1.0;
        vec![d * d, 2.0 * d * (1.0 + x[0]) * (x[0] * x[0]).exp() + 2.0 * d * (z[0] - 1.0)]
    }

    fn jacobian_x(&self, x: &[f64], z: &[f64]) -> Result<Matrix, PlantError> {
        let d = x[1] - 1.0;
        let ex = (x[0] * x[0]).exp();
        Ok(Matrix::from_rows(&[
            [0.0, 2.0 * d],
            [2.0 * d * ex * (1.0 + 2.0 * x[0] + 2.0 * x[0] * x[0]), 2.0 * (1.0 + x[0]) * ex + 2.0 * (z[0] - 1.0)],
        ]))
    }

    fn jacobian_z(&self, x: &[f64], _z: &[f64]) -> Result<Matrix, PlantError> {
        Ok(Matrix::from_rows(&[[0.0], [2.0 * (x[1] - 1.0)]]))
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }
}

/// Linearizing coordinates `x_e = (x₁, x₂, x₃)`.
pub fn linearizing_coords(x: &[f64], z: &[f64]) -> [f64; 3] {
    [x[0], x[1], (1.0 + x[0]) * (x[0] * x[0]).exp() + z[0] - 1.0]
}

/// Feedback-linearizing state feedback placing all three closed-loop poles
/// at −1, with the quadratic Lyapunov function `x_eᵀ P̄ x_e`.
#[derive(Clone, Debug)]
pub struct ExampleController {
    p_bar: Matrix,
}

impl ExampleController {
    pub fn new() -> Result<Self, MatError> {
        Ok(Self { p_bar: closed_loop_lyapunov()? })
    }

    pub fn p_bar(&self) -> &Matrix {
        &self.p_bar
    }
}

impl Controller for ExampleController {
    fn name(&self) -> &str {
        "example-linearizing"
    }

    fn control(&self, x: &[f64], z: &[f64]) -> f64 {
        example_controller(x, z[0])
    }

    fn lyapunov(&self, x: &[f64], z: &[f64]) -> Option<f64> {
        let xe = linearizing_coords(x, z);
        Some(crate::matkit::dot(&xe, &self.p_bar.mul_vec(&xe)))
    }
}

pub fn example_controller(x: &[f64], z1: f64) -> f64 {
    let xe = linearizing_coords(x, &[z1]);
    let ex = (x[0] * x[0]).exp();
    let cancel = -x[1] * ex * (2.0 * x[0] * x[0] + 2.0 * x[0] + 1.0);
    let k = FEEDBACK_GAIN;
    cancel - (k[0] * xe[0] + k[1] * xe[1] + k[2] * xe[2])
}

/// `P̄` solving `P̄(A_c − B_c K) + (A_c − B_c K)ᵀP̄ = −I` for n = 3.
pub fn closed_loop_lyapunov() -> Result<Matrix, MatError> {
    solve_lyapunov(&CanonicalForms::new(3).state_feedback(&FEEDBACK_GAIN))
}

/// The projection box for a given `ω ∈ (0, 1)` and the matching level
/// `c₂ = ω²·λ_min(P̄)`.
#[derive(Clone, Debug)]
pub struct ExampleSets {
    pub box_set: BoxSet,
    pub c2: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ExampleError {
    #[error("omega must lie in (0, 1), got {0}")]
    InvalidOmega(f64),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

pub fn example_sets(omega: f64) -> Result<ExampleSets, ExampleError> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(ExampleError::InvalidOmega(omega));
    }
    let lo = [(1.0 - omega).powi(2), -2.0 * omega * (omega + 1.0)];
    let hi = [(1.0 + omega).powi(2), 2.0 * omega * (omega + 1.0)];
    let box_set = BoxSet::new(&lo, &hi)?.with_chain_len(1);
    let c2 = omega * omega * sym_eigen(&closed_loop_lyapunov()?)?.min();
    Ok(ExampleSets { box_set, c2 })
}

/// Where an initial condition sits relative to `Ω_{c₂}`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialConditionCheck {
    pub xe_norm: f64,
    /// `ω·(λ_min(P̄)/λ_max(P̄))^{1/2}`: a ball of this radius lies in `Ω_{c₂}`.
    pub sufficient_radius: f64,
    pub lyapunov_value: f64,
    pub c2: f64,
}

impl InitialConditionCheck {
    pub fn sphere_condition_holds(&self) -> bool {
        self.xe_norm <= self.sufficient_radius
    }

    pub fn inside_level_set(&self) -> bool {
        self.lyapunov_value <= self.c2
    }
}

pub fn check_initial_condition(omega: f64, x: &[f64], z: &[f64]) -> Result<InitialConditionCheck, ExampleError> {
    let sets = example_sets(omega)?;
    let p_bar = closed_loop_lyapunov()?;
    let eig = sym_eigen(&p_bar)?;
    let xe = linearizing_coords(x, z);
    Ok(InitialConditionCheck {
        xe_norm: norm2(&xe),
        sufficient_radius: omega * (eig.min() / eig.max()).sqrt(),
        lyapunov_value: crate::matkit::dot(&xe, &p_bar.mul_vec(&xe)),
        c2: sets.c2,
    })
}

/// Named scenario presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Output feedback, ρ = 0.2.
    Fig2a,
    /// Output feedback, ρ = 0.05.
    Fig2b,
    /// Peaking transient, ρ = 10⁻³.
    Fig3,
    /// Phase-plane comparison, ρ = 10⁻⁴.
    Fig4,
    /// Trajectory recovery sweep over ρ.
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig2a, Preset::Fig2b, Preset::Fig3, Preset::Fig4, Preset::Fig5];

    pub fn id(self) -> &'static str {
        match self {
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }

    /// ρ values the preset runs by default; the first is used by `run`.
    pub fn rhos(self) -> &'static [f64] {
        match self {
            Preset::Fig2a => &[0.2],
            Preset::Fig2b => &[0.05],
            Preset::Fig3 => &[1e-3],
            Preset::Fig4 => &[1e-4],
            Preset::Fig5 => &[0.2, 0.05, 0.01],
        }
    }

    pub fn t_final(self) -> f64 {
        match self {
            Preset::Fig3 | Preset::Fig4 => 2.0,
            _ => 15.0,
        }
    }

    /// Step size for a given ρ.
    pub fn dt(self, rho: f64) -> f64 {
        match self {
            Preset::Fig2a | Preset::Fig2b => 1e-3_f64.min(rho / 20.0),
            Preset::Fig5 => 5e-4_f64.min(rho / 20.0),
            Preset::Fig3 | Preset::Fig4 => rho / 20.0,
        }
    }

    pub fn log_stride(self) -> usize {
        match self {
            Preset::Fig2a | Preset::Fig2b | Preset::Fig3 => 1,
            Preset::Fig4 => 4,
            Preset::Fig5 => 2,
        }
    }

    pub fn scenario(self) -> Result<ScenarioConfig, ExampleError> {
        self.scenario_with_rho(self.rhos()[0])
    }

    /// Output-feedback scenario with projection enabled.
    pub fn scenario_with_rho(self, rho: f64) -> Result<ScenarioConfig, ExampleError> {
        let sets = example_sets(OMEGA)?;
        let mut cfg = ScenarioConfig::new(
            format!("{}-rho{}", self.id(), rho),
            Arc::new(ExamplePlant),
            Arc::new(ExampleController::new()?),
            OBSERVER_GAIN.to_vec(),
            rho,
            X0.to_vec(),
            Z0.to_vec(),
            XHAT0.to_vec(),
            self.dt(rho),
            self.t_final(),
        );
        cfg.set = Some(Arc::new(sets.box_set));
        cfg.log_stride = self.log_stride();
        Ok(cfg)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL.into_iter().find(|p| p.id().eq_ignore_ascii_case(s)).ok_or_else(|| {
            let names: Vec<_> = Preset::ALL.iter().map(|p| p.id()).collect();
            format!("unknown preset '{s}' (expected one of {})", names.join(", "))
        })
    }
}
