//! C ABI for the `obsproj` simulator.
//!
//! Every function returns an [`ObsprojStatus`] (or a plain value for pure
//! accessors). Handles are opaque and must be released with their `_free`
//! function. When a call fails, [`obsproj_last_error`] returns a message
//! for the calling thread.
//!
//! A failed simulation still produces a trajectory handle holding the
//! samples logged before the failure.

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use obsproj::example::{example_sets, Preset, OMEGA};
use obsproj::matkit::{solve_lyapunov, Matrix};
use obsproj::sim::{
    compute_metrics, simulate_output_feedback, simulate_state_feedback, ScenarioConfig, SimFailure, TrajectoryRecord,
};
use obsproj::trajio::write_csv_file;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObsprojStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    /// The run stopped early; the trajectory handle holds the partial log.
    SimulationFailed = 4,
    Io = 5,
    NotHurwitz = 6,
    OutOfRange = 7,
    Internal = 8,
}

/// Feedback source for [`obsproj_simulate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObsprojFeedback {
    Output = 0,
    State = 1,
}

/// Scalar summary of a trajectory. Undefined quantities are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObsprojMetrics {
    pub peak_xhat: f64,
    pub conv_time: f64,
    pub final_norm: f64,
    pub max_abs_v: f64,
    pub recovery_dev: f64,
}

/// Opaque scenario handle.
pub struct ObsprojScenario {
    cfg: ScenarioConfig,
}

/// Opaque trajectory handle.
pub struct ObsprojTrajectory {
    record: TrajectoryRecord,
    columns: Vec<CString>,
    error_name: Option<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: ObsprojStatus, msg: impl Into<String>) -> ObsprojStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> ObsprojStatus) -> ObsprojStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(ObsprojStatus::Internal, "internal panic"))
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, ObsprojStatus> {
    if p.is_null() {
        return Err(fail(ObsprojStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(ObsprojStatus::InvalidArgument, "string is not UTF-8"))
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn obsproj_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn obsproj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a scenario from a preset name (`fig2a`, `fig2b`, `fig3`,
/// `fig4`, `fig5`). `rho <= 0` selects the preset's default.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obsproj_scenario_from_preset(
    name: *const c_char,
    rho: f64,
    out: *mut *mut ObsprojScenario,
) -> ObsprojStatus {
    guard(|| {
        if out.is_null() {
            return fail(ObsprojStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let name = match c_str(name) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let preset: Preset = match name.parse() {
            Ok(p) => p,
            Err(e) => return fail(ObsprojStatus::InvalidArgument, e),
        };
        let rho = if rho > 0.0 { rho } else { preset.rhos()[0] };
        match preset.scenario_with_rho(rho) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(ObsprojScenario { cfg }));
                ObsprojStatus::Ok
            }
            Err(e) => fail(ObsprojStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must come from [`obsproj_scenario_from_preset`] or be null.
#[no_mangle]
pub unsafe extern "C" fn obsproj_scenario_free(s: *mut ObsprojScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

unsafe fn with_scenario(s: *mut ObsprojScenario, f: impl FnOnce(&mut ScenarioConfig)) -> ObsprojStatus {
    guard(|| match s.as_mut() {
        None => fail(ObsprojStatus::NullPointer, "scenario is null"),
        Some(s) => {
            f(&mut s.cfg);
            ObsprojStatus::Ok
        }
    })
}

/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn obsproj_scenario_set_rho(s: *mut ObsprojScenario, rho: f64) -> ObsprojStatus {
    with_scenario(s, |c| c.rho = rho)
}

/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn obsproj_scenario_set_dt(s: *mut ObsprojScenario, dt: f64) -> ObsprojStatus {
    with_scenario(s, |c| c.dt = dt)
}

/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn obsproj_scenario_set_t_final(s: *mut ObsprojScenario, t_final: f64) -> ObsprojStatus {
    with_scenario(s, |c| c.t_final = t_final)
}

/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn obsproj_scenario_set_log_stride(s: *mut ObsprojScenario, stride: usize) -> ObsprojStatus {
    with_scenario(s, |c| c.log_stride = stride)
}

/// Disables (`enabled == 0`) or restores the preset's projection set.
///
/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn obsproj_scenario_set_projection(s: *mut ObsprojScenario, enabled: c_int) -> ObsprojStatus {
    guard(|| {
        let Some(sc) = s.as_mut() else {
            return fail(ObsprojStatus::NullPointer, "scenario is null");
        };
        if enabled == 0 {
            sc.cfg.set = None;
            return ObsprojStatus::Ok;
        }
        if sc.cfg.set.is_none() {
            match example_sets(OMEGA) {
                Ok(sets) => sc.cfg.set = Some(Arc::new(sets.box_set)),
                Err(e) => return fail(ObsprojStatus::InvalidConfig, e.to_string()),
            }
        }
        ObsprojStatus::Ok
    })
}

/// # Safety
/// `s` must be a live scenario handle and `xhat0` must point to `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn obsproj_scenario_set_xhat0(
    s: *mut ObsprojScenario,
    xhat0: *const f64,
    len: usize,
) -> ObsprojStatus {
    if xhat0.is_null() {
        return fail(ObsprojStatus::NullPointer, "xhat0 is null");
    }
    let values = std::slice::from_raw_parts(xhat0, len).to_vec();
    with_scenario(s, |c| c.xhat0 = values)
}

/// Checks the scenario without running it.
///
/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn obsproj_scenario_validate(s: *const ObsprojScenario) -> ObsprojStatus {
    guard(|| match s.as_ref() {
        None => fail(ObsprojStatus::NullPointer, "scenario is null"),
        Some(s) => match s.cfg.validate() {
            Ok(()) => ObsprojStatus::Ok,
            Err(e) => fail(ObsprojStatus::InvalidConfig, e.to_string()),
        },
    })
}

fn trajectory_handle(record: TrajectoryRecord, error_name: Option<&str>) -> *mut ObsprojTrajectory {
    let columns = record.header().into_iter().map(|h| CString::new(h).expect("column names have no NUL")).collect();
    Box::into_raw(Box::new(ObsprojTrajectory {
        record,
        columns,
        error_name: error_name.map(|n| CString::new(n).expect("error names have no NUL")),
    }))
}

/// Runs the scenario. On [`ObsprojStatus::Ok`] or
/// [`ObsprojStatus::SimulationFailed`] `*out` receives a trajectory handle;
/// on configuration errors it is set to null.
///
/// # Safety
/// `s` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obsproj_simulate(
    s: *const ObsprojScenario,
    feedback: ObsprojFeedback,
    out: *mut *mut ObsprojTrajectory,
) -> ObsprojStatus {
    guard(|| {
        if out.is_null() {
            return fail(ObsprojStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(s) = s.as_ref() else {
            return fail(ObsprojStatus::NullPointer, "scenario is null");
        };
        if let Err(e) = s.cfg.validate() {
            return fail(ObsprojStatus::InvalidConfig, e.to_string());
        }
        let result = match feedback {
            ObsprojFeedback::Output => simulate_output_feedback(&s.cfg),
            ObsprojFeedback::State => simulate_state_feedback(&s.cfg),
        };
        match result {
            Ok(record) => {
                *out = trajectory_handle(record, None);
                ObsprojStatus::Ok
            }
            Err(SimFailure { error, partial }) => {
                *out = trajectory_handle(*partial, Some(error.name()));
                fail(ObsprojStatus::SimulationFailed, format!("{}: {error}", error.name()))
            }
        }
    })
}

/// # Safety
/// `t` must come from [`obsproj_simulate`] or be null.
#[no_mangle]
pub unsafe extern "C" fn obsproj_trajectory_free(t: *mut ObsprojTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of logged rows; 0 for a null handle.
///
/// # Safety
/// `t` must be a live trajectory handle or null.
#[no_mangle]
pub unsafe extern "C" fn obsproj_trajectory_rows(t: *const ObsprojTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.record.len())
}

/// Number of CSV columns; 0 for a null handle.
///
/// # Safety
/// `t` must be a live trajectory handle or null.
#[no_mangle]
pub unsafe extern "C" fn obsproj_trajectory_columns(t: *const ObsprojTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.columns.len())
}

/// Column name, valid for the life of the handle; null when out of range.
///
/// # Safety
/// `t` must be a live trajectory handle or null.
#[no_mangle]
pub unsafe extern "C" fn obsproj_trajectory_column_name(t: *const ObsprojTrajectory, col: usize) -> *const c_char {
    t.as_ref().and_then(|t| t.columns.get(col)).map_or(ptr::null(), |c| c.as_ptr())
}

/// Name of the error that stopped the run, or null if it completed.
///
/// # Safety
/// `t` must be a live trajectory handle or null.
#[no_mangle]
pub unsafe extern "C" fn obsproj_trajectory_error_name(t: *const ObsprojTrajectory) -> *const c_char {
    t.as_ref().and_then(|t| t.error_name.as_ref()).map_or(ptr::null(), |c| c.as_ptr())
}

fn cell(record: &TrajectoryRecord, row: usize, col: usize) -> Option<f64> {
    let s = record.samples.get(row)?;
    let mut values = vec![s.t];
    for block in [&s.x, &s.z, &s.xhat, &s.xi, &s.xi_hat] {
        values.extend_from_slice(block);
    }
    values.push(s.v);
    values.push(if s.proj_active { 1.0 } else { 0.0 });
    values.push(if s.clamped { 1.0 } else { 0.0 });
    values.push(s.lyapunov.unwrap_or(f64::NAN));
    values.get(col).copied()
}

/// Reads one cell in CSV column order. An empty `V` cell reads as NaN.
///
/// # Safety
/// `t` must be a live trajectory handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obsproj_trajectory_value(
    t: *const ObsprojTrajectory,
    row: usize,
    col: usize,
    out: *mut f64,
) -> ObsprojStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), out.is_null()) else {
            return fail(ObsprojStatus::NullPointer, "null trajectory or output");
        };
        match cell(&t.record, row, col) {
            Some(v) => {
                *out = v;
                ObsprojStatus::Ok
            }
            None => fail(ObsprojStatus::OutOfRange, format!("cell ({row}, {col}) out of range")),
        }
    })
}

/// Copies a whole column into `buf`, which must hold at least `rows`
/// doubles.
///
/// # Safety
/// `t` must be a live trajectory handle and `buf` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn obsproj_trajectory_column(
    t: *const ObsprojTrajectory,
    col: usize,
    buf: *mut f64,
    len: usize,
) -> ObsprojStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), buf.is_null()) else {
            return fail(ObsprojStatus::NullPointer, "null trajectory or buffer");
        };
        let rows = t.record.len();
        if len < rows {
            return fail(ObsprojStatus::InvalidArgument, format!("buffer holds {len} values, need {rows}"));
        }
        if col >= t.columns.len() {
            return fail(ObsprojStatus::OutOfRange, format!("column {col} out of range"));
        }
        let out = std::slice::from_raw_parts_mut(buf, rows);
        for (row, slot) in out.iter_mut().enumerate() {
            *slot = cell(&t.record, row, col).expect("row and column checked");
        }
        ObsprojStatus::Ok
    })
}

/// Writes the trajectory as CSV.
///
/// # Safety
/// `t` must be a live trajectory handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn obsproj_trajectory_write_csv(
    t: *const ObsprojTrajectory,
    path: *const c_char,
) -> ObsprojStatus {
    guard(|| {
        let Some(t) = t.as_ref() else {
            return fail(ObsprojStatus::NullPointer, "trajectory is null");
        };
        let path = match c_str(path) {
            Ok(p) => p,
            Err(e) => return e,
        };
        match write_csv_file(&t.record, Path::new(path)) {
            Ok(()) => ObsprojStatus::Ok,
            Err(e) => fail(ObsprojStatus::Io, e.to_string()),
        }
    })
}

/// Computes run metrics; `reference` may be null. `eps` is the
/// convergence threshold for `conv_time`.
///
/// # Safety
/// `t` must be a live trajectory handle, `reference` a live handle or
/// null, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn obsproj_trajectory_metrics(
    t: *const ObsprojTrajectory,
    reference: *const ObsprojTrajectory,
    eps: f64,
    out: *mut ObsprojMetrics,
) -> ObsprojStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), out.is_null()) else {
            return fail(ObsprojStatus::NullPointer, "null trajectory or output");
        };
        if !(eps > 0.0) {
            return fail(ObsprojStatus::InvalidArgument, "eps must be positive");
        }
        let reference = reference.as_ref().map(|r| &r.record);
        match compute_metrics(&t.record, reference, eps) {
            Ok(m) => {
                *out = ObsprojMetrics {
                    peak_xhat: m.peak_xhat,
                    conv_time: m.conv_time.unwrap_or(f64::NAN),
                    final_norm: m.final_norm,
                    max_abs_v: m.max_abs_v,
                    recovery_dev: m.recovery_dev.unwrap_or(f64::NAN),
                };
                ObsprojStatus::Ok
            }
            Err(e) => fail(ObsprojStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Solves `P·A + Aᵀ·P = −I` for a row-major n×n matrix `a`, writing the
/// row-major solution to `p_out`.
///
/// # Safety
/// `a` and `p_out` must each point to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn obsproj_solve_lyapunov(a: *const f64, n: usize, p_out: *mut f64) -> ObsprojStatus {
    guard(|| {
        if a.is_null() || p_out.is_null() {
            return fail(ObsprojStatus::NullPointer, "null matrix pointer");
        }
        if n == 0 {
            return fail(ObsprojStatus::InvalidArgument, "n must be positive");
        }
        let data = std::slice::from_raw_parts(a, n * n).to_vec();
        let m = match Matrix::from_row_major(n, n, data) {
            Ok(m) => m,
            Err(e) => return fail(ObsprojStatus::InvalidArgument, e.to_string()),
        };
        match solve_lyapunov(&m) {
            Ok(p) => {
                std::slice::from_raw_parts_mut(p_out, n * n).copy_from_slice(p.as_slice());
                ObsprojStatus::Ok
            }
            Err(e) => fail(ObsprojStatus::NotHurwitz, e.to_string()),
        }
    })
}
