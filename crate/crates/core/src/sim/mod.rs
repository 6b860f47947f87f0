//! Closed-loop simulation: state feedback on the extended system and
//! output feedback through the (optionally projected) observer.

mod metrics;
mod record;
mod rk4;

pub use metrics::{compare_records, compute_metrics, Comparison, Metrics, MetricsError};
pub use record::{Sample, TrajectoryRecord};
pub use rk4::rk4_step;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::matkit::norm2;
use crate::observer::{design_gains, observer_rhs, GainSet, ObserverError, DEFAULT_SINGULAR_TOL};
use crate::plant::{chain_derivative, extend_system, invert_observability, plant_input, Plant, PlantError};
use crate::projection::{project_xhatdot, ConvexSet, ProjectionError};

pub const DEFAULT_ESCAPE_BOUND: f64 = 1e6;

/// Post-step drift (relative to the face scale) above which the estimate
/// is clamped back onto the set.
pub const CLAMP_TOL: f64 = 1e-12;

/// A state-feedback law `v = φ(x, z)` for the extended system.
pub trait Controller: Send + Sync {
    fn name(&self) -> &str;

    fn control(&self, x: &[f64], z: &[f64]) -> f64;

    /// Lyapunov function certifying the state-feedback loop, if known.
    fn lyapunov(&self, _x: &[f64], _z: &[f64]) -> Option<f64> {
        None
    }
}

/// Inner refinement of a fixed step.
///
/// Each grid step is taken as one RK4 step of size `dt` unless the
/// step-doubling error estimate exceeds `local_tol` (relative to
/// `1 + ‖state‖∞`) or a stage fails, in which case the step is split in
/// halves recursively, at most `max_depth` times. The logging grid is
/// unaffected and the result is deterministic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Refinement {
    pub local_tol: f64,
    pub max_depth: u32,
}

impl Default for Refinement {
    fn default() -> Self {
        Self { local_tol: 1e-6, max_depth: 30 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("dt must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("t_final must be positive and finite, got {0}")]
    InvalidFinalTime(f64),
    #[error("dt = {dt} exceeds rho/20 = {limit} (required when rho < 0.1)")]
    StiffStep { dt: f64, limit: f64 },
    #[error("log_stride must be at least 1")]
    InvalidStride,
    #[error("{0}")]
    Dimension(String),
    #[error("initial estimate image H(xhat0, z0) = {xi:?} lies outside the projection set")]
    EstimateOutsideSet { xi: Vec<f64> },
    #[error("observer design failed: {0}")]
    Design(#[from] ObserverError),
}

/// Failure inside one integration step.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("non-finite derivative at RK4 stage {stage}")]
    NonFiniteDerivative { stage: usize },
    #[error("state escaped: ‖χ‖ = {norm:e} exceeds {bound:e}")]
    StateEscape { norm: f64, bound: f64 },
    #[error("observer Jacobian singular (|det| = {det:e})")]
    ObserverJacobianSingular { det: f64 },
    #[error("projection failed: {0}")]
    Projection(ProjectionError),
    #[error("observer failed: {0}")]
    Observer(ObserverError),
    #[error("could not restore the estimate onto the set: {0}")]
    Restore(PlantError),
    #[error("{0}")]
    Dimension(String),
}

impl From<ObserverError> for StepError {
    fn from(e: ObserverError) -> Self {
        match e {
            ObserverError::JacobianSingular { det } => StepError::ObserverJacobianSingular { det },
            other => StepError::Observer(other),
        }
    }
}

impl From<ProjectionError> for StepError {
    fn from(e: ProjectionError) -> Self {
        match e {
            ProjectionError::Observer(o) => o.into(),
            other => StepError::Projection(other),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("step {step} (t = {t}): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: StepError,
    },
}

impl SimError {
    /// Short error name for summaries and exit reporting.
    pub fn name(&self) -> &'static str {
        match self {
            SimError::Config(_) => "InvalidConfig",
            SimError::Step { source, .. } => match source {
                StepError::NonFiniteDerivative { .. } => "NonFiniteDerivative",
                StepError::StateEscape { .. } => "StateEscape",
                StepError::ObserverJacobianSingular { .. } => "ObserverJacobianSingular",
                StepError::Projection(ProjectionError::DegenerateNormal { .. }) => "DegenerateNormal",
                StepError::Projection(_) => "ProjectionError",
                StepError::Observer(_) => "ObserverError",
                StepError::Restore(_) => "RestoreFailed",
                StepError::Dimension(_) => "DimensionMismatch",
            },
        }
    }
}

/// A failed run together with everything logged before the failure.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{error}")]
pub struct SimFailure {
    #[source]
    pub error: SimError,
    pub partial: Box<TrajectoryRecord>,
}

/// Everything needed to run one closed-loop scenario.
#[derive(Clone)]
pub struct ScenarioConfig {
    pub label: String,
    pub plant: Arc<dyn Plant>,
    pub controller: Arc<dyn Controller>,
    pub observer_gain: Vec<f64>,
    pub rho: f64,
    /// Projection target; `None` runs the bare observer.
    pub set: Option<Arc<dyn ConvexSet>>,
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    pub xhat0: Vec<f64>,
    pub dt: f64,
    pub t_final: f64,
    pub log_stride: usize,
    pub escape_bound: f64,
    pub singular_tol: f64,
    /// `None` gives plain fixed-step RK4.
    pub refinement: Option<Refinement>,
}

impl fmt::Debug for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScenarioConfig")
            .field("label", &self.label)
            .field("plant", &self.plant.name())
            .field("controller", &self.controller.name())
            .field("observer_gain", &self.observer_gain)
            .field("rho", &self.rho)
            .field("projection", &self.set.is_some())
            .field("x0", &self.x0)
            .field("z0", &self.z0)
            .field("xhat0", &self.xhat0)
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("log_stride", &self.log_stride)
            .field("escape_bound", &self.escape_bound)
            .field("singular_tol", &self.singular_tol)
            .field("refinement", &self.refinement)
            .finish()
    }
}

impl ScenarioConfig {
    /// Scenario with default tolerances; the caller fills in the rest.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        plant: Arc<dyn Plant>,
        controller: Arc<dyn Controller>,
        observer_gain: Vec<f64>,
        rho: f64,
        x0: Vec<f64>,
        z0: Vec<f64>,
        xhat0: Vec<f64>,
        dt: f64,
        t_final: f64,
    ) -> Self {
        Self {
            label: label.into(),
            plant,
            controller,
            observer_gain,
            rho,
            set: None,
            x0,
            z0,
            xhat0,
            dt,
            t_final,
            log_stride: 1,
            escape_bound: DEFAULT_ESCAPE_BOUND,
            singular_tol: DEFAULT_SINGULAR_TOL,
            refinement: Some(Refinement::default()),
        }
    }

    pub fn step_count(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::InvalidDt(self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(ConfigError::InvalidFinalTime(self.t_final));
        }
        if self.rho < 0.1 {
            let limit = self.rho / 20.0;
            if self.dt > limit * (1.0 + 1e-12) {
                return Err(ConfigError::StiffStep { dt: self.dt, limit });
            }
        }
        if self.log_stride == 0 {
            return Err(ConfigError::InvalidStride);
        }
        let n = self.plant.state_dim();
        let m = self.plant.chain_len();
        let dims = [
            ("x0", self.x0.len(), n),
            ("xhat0", self.xhat0.len(), n),
            ("observer gain", self.observer_gain.len(), n),
            ("z0", self.z0.len(), m),
        ];
        for (name, got, want) in dims {
            if got != want {
                return Err(ConfigError::Dimension(format!("{name} has {got} entries, expected {want}")));
            }
        }
        if let Some(set) = &self.set {
            if set.dim() != n {
                return Err(ConfigError::Dimension(format!(
                    "projection set has dimension {}, expected {n}",
                    set.dim()
                )));
            }
            let xi = self.plant.observability_map(&self.xhat0, &self.z0);
            if set.max_violation(&xi, &self.z0) > CLAMP_TOL {
                return Err(ConfigError::EstimateOutsideSet { xi });
            }
        }
        design_gains(&self.observer_gain, self.rho)?;
        Ok(())
    }

    pub fn gains(&self) -> Result<GainSet, ConfigError> {
        Ok(design_gains(&self.observer_gain, self.rho)?.with_singular_tol(self.singular_tol))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    State,
    Output,
}

/// Control and projection status at one evaluation.
#[derive(Clone, Copy, Debug)]
struct StageInfo {
    v: f64,
    proj_active: bool,
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    gains: Option<GainSet>,
    mode: Mode,
    n: usize,
    m: usize,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ScenarioConfig, mode: Mode) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let gains = match mode {
            Mode::Output => Some(cfg.gains()?),
            Mode::State => None,
        };
        Ok(Self { cfg, gains, mode, n: cfg.plant.state_dim(), m: cfg.plant.chain_len() })
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut s = self.cfg.x0.clone();
        s.extend_from_slice(&self.cfg.z0);
        if self.mode == Mode::Output {
            s.extend_from_slice(&self.cfg.xhat0);
        }
        s
    }

    fn split<'s>(&self, s: &'s [f64]) -> (&'s [f64], &'s [f64], &'s [f64]) {
        let (x, rest) = s.split_at(self.n);
        let (z, xhat) = rest.split_at(self.m);
        match self.mode {
            Mode::Output => (x, z, xhat),
            Mode::State => (x, z, x),
        }
    }

    fn derivative(&self, s: &[f64]) -> Result<(Vec<f64>, StageInfo), StepError> {
        let plant = self.cfg.plant.as_ref();
        let (x, z, xhat) = self.split(s);
        let v = self.cfg.controller.control(xhat, z);
        if self.mode == Mode::State {
            let d = extend_system(plant).rhs(s, v);
            return Ok((d, StageInfo { v, proj_active: false }));
        }
        let gains = self.gains.as_ref().expect("output mode has gains");
        let u = plant_input(z, v);
        let zdot = chain_derivative(z, v);
        let y = plant.output(x, u);
        let mut d = plant.dynamics(x, u);
        d.extend_from_slice(&zdot);
        let proj_active = match &self.cfg.set {
            Some(set) => {
                let p = project_xhatdot(plant, set.as_ref(), gains, xhat, z, &zdot, u, y)?;
                d.extend(p.xhatdot);
                p.outcome.is_active()
            }
            None => {
                d.extend(observer_rhs(plant, gains, xhat, z, u, y)?);
                false
            }
        };
        Ok((d, StageInfo { v, proj_active }))
    }

    fn rk4(&self, s: &[f64], t: f64, h: f64) -> Result<Vec<f64>, StepError> {
        rk4_step(|_, y| self.derivative(y).map(|(d, _)| d), s, t, h)
    }

    /// Moves a drifted estimate back onto the set; returns whether it did.
    fn restore(&self, s: &mut [f64]) -> Result<bool, StepError> {
        let Some(set) = (self.mode == Mode::Output).then_some(()).and(self.cfg.set.as_ref()) else {
            return Ok(false);
        };
        let plant = self.cfg.plant.as_ref();
        let (_, z, xhat) = self.split(s);
        let xi_hat = plant.observability_map(xhat, z);
        if !(set.max_violation(&xi_hat, z) > CLAMP_TOL) {
            return Ok(false);
        }
        let target = set.restore(&xi_hat, z);
        let fixed = invert_observability(plant, &target, z, xhat).map_err(StepError::Restore)?;
        let off = self.n + self.m;
        s[off..off + self.n].copy_from_slice(&fixed);
        Ok(true)
    }

    fn advance(&self, s: &[f64], t: f64, h: f64, depth: u32, clamped: &mut bool) -> Result<Vec<f64>, StepError> {
        let full = self.rk4(s, t, h);
        let Some(refine) = self.cfg.refinement else {
            let mut next = full?;
            *clamped |= self.restore(&mut next)?;
            return Ok(next);
        };
        if depth < refine.max_depth {
            let accepted = match &full {
                Ok(full) => {
                    let halves = self.rk4(s, t, 0.5 * h).and_then(|mid| self.rk4(&mid, t + 0.5 * h, 0.5 * h));
                    match halves {
                        Ok(two) => {
                            let scale = 1.0 + s.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                            let err = full.iter().zip(&two).fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
                            err <= refine.local_tol * scale
                        }
                        Err(_) => false,
                    }
                }
                Err(_) => false,
            };
            if !accepted {
                let mut mid = self.advance(s, t, 0.5 * h, depth + 1, clamped)?;
                *clamped |= self.restore(&mut mid)?;
                return self.advance(&mid, t + 0.5 * h, 0.5 * h, depth + 1, clamped);
            }
        }
        let mut next = full?;
        *clamped |= self.restore(&mut next)?;
        Ok(next)
    }

    fn sample(&self, s: &[f64], t: f64, clamped: bool) -> Result<Sample, StepError> {
        let plant = self.cfg.plant.as_ref();
        let (_, info) = self.derivative(s)?;
        let (x, z, xhat) = self.split(s);
        let xi = plant.observability_map(x, z);
        let xi_hat = match self.mode {
            Mode::Output => plant.observability_map(xhat, z),
            Mode::State => xi.clone(),
        };
        Ok(Sample {
            t,
            x: x.to_vec(),
            z: z.to_vec(),
            xhat: xhat.to_vec(),
            xi,
            xi_hat,
            v: info.v,
            proj_active: info.proj_active,
            clamped,
            lyapunov: self.cfg.controller.lyapunov(x, z),
        })
    }

    fn run(&self) -> Result<TrajectoryRecord, SimFailure> {
        let cfg = self.cfg;
        let mut rec = TrajectoryRecord::new(self.n, self.m);
        let fail = |rec: TrajectoryRecord, step: usize, t: f64, source: StepError| SimFailure {
            error: SimError::Step { step, t, source },
            partial: Box::new(rec),
        };

        let mut state = self.initial_state();
        match self.sample(&state, 0.0, false) {
            Ok(s) => rec.samples.push(s),
            Err(e) => return Err(fail(rec, 0, 0.0, e)),
        }
        let mut clamped = false;
        for k in 0..cfg.step_count() {
            let t = k as f64 * cfg.dt;
            state = match self.advance(&state, t, cfg.dt, 0, &mut clamped) {
                Ok(s) => s,
                Err(e) => return Err(fail(rec, k, t, e)),
            };
            let t_next = (k + 1) as f64 * cfg.dt;
            let chi_norm = norm2(&state[..self.n + self.m]);
            if !(chi_norm <= cfg.escape_bound) {
                let e = StepError::StateEscape { norm: chi_norm, bound: cfg.escape_bound };
                return Err(fail(rec, k + 1, t_next, e));
            }
            if (k + 1) % cfg.log_stride == 0 {
                match self.sample(&state, t_next, clamped) {
                    Ok(s) => rec.samples.push(s),
                    Err(e) => return Err(fail(rec, k + 1, t_next, e)),
                }
                clamped = false;
            }
        }
        Ok(rec)
    }
}

fn run(cfg: &ScenarioConfig, mode: Mode) -> Result<TrajectoryRecord, SimFailure> {
    let runner = Runner::new(cfg, mode).map_err(|e| SimFailure {
        error: e.into(),
        partial: Box::new(TrajectoryRecord::new(cfg.plant.state_dim(), cfg.plant.chain_len())),
    })?;
    runner.run()
}

/// Integrates the extended system under `v = φ(x, z)`.
///
/// The estimate columns of the record repeat the true state.
pub fn simulate_state_feedback(cfg: &ScenarioConfig) -> Result<TrajectoryRecord, SimFailure> {
    run(cfg, Mode::State)
}

/// Integrates plant, integrator chain and observer under `v = φ(x̂, z)`.
///
/// At every RK4 stage the control is computed from the current estimate
/// and chain state first, then the plant, chain and observer derivatives.
/// With a projection set the observer derivative is projected and any
/// post-step drift outside the set is clamped back.
pub fn simulate_output_feedback(cfg: &ScenarioConfig) -> Result<TrajectoryRecord, SimFailure> {
    run(cfg, Mode::Output)
}
