use thiserror::Error;

use super::record::{diff, TrajectoryRecord};
use crate::matkit::norm2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("time grids differ: {0}")]
    GridMismatch(String),
}

/// Scalar summaries of a logged run.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    /// `max_t ‖x̂(t)‖`.
    pub peak_xhat: f64,
    pub eps: f64,
    /// First logged time after which `‖x̂ − x‖ ≤ eps` holds for good.
    pub conv_time: Option<f64>,
    /// `‖χ‖` at the last logged sample.
    pub final_norm: f64,
    pub max_abs_v: f64,
    /// `sup_t ‖χ(t) − χ_ref(t)‖` against a reference run.
    pub recovery_dev: Option<f64>,
}

fn check_grids(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::GridMismatch(format!("{} samples vs {} samples", a.len(), b.len())));
    }
    if (a.state_dim, a.chain_len) != (b.state_dim, b.chain_len) {
        return Err(MetricsError::GridMismatch(format!(
            "dimensions ({}, {}) vs ({}, {})",
            a.state_dim, a.chain_len, b.state_dim, b.chain_len
        )));
    }
    for (i, (ta, tb)) in a.times().zip(b.times()).enumerate() {
        if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) {
            return Err(MetricsError::GridMismatch(format!("row {i}: t = {ta} vs t = {tb}")));
        }
    }
    Ok(())
}

pub fn compute_metrics(
    traj: &TrajectoryRecord,
    reference: Option<&TrajectoryRecord>,
    eps: f64,
) -> Result<Metrics, MetricsError> {
    let recovery_dev = match reference {
        Some(r) => {
            check_grids(traj, r)?;
            Some(traj.samples.iter().zip(&r.samples).map(|(a, b)| norm2(&diff(&a.chi(), &b.chi()))).fold(0.0, f64::max))
        }
        None => None,
    };

    let peak_xhat = traj.samples.iter().map(|s| norm2(&s.xhat)).fold(0.0, f64::max);
    let max_abs_v = traj.samples.iter().map(|s| s.v.abs()).fold(0.0, f64::max);
    let final_norm = traj.last().map_or(0.0, |s| norm2(&s.chi()));

    let conv_time = match traj.samples.iter().rposition(|s| !(s.estimation_error() <= eps)) {
        None => traj.samples.first().map(|s| s.t),
        Some(i) => traj.samples.get(i + 1).map(|s| s.t),
    };

    Ok(Metrics { peak_xhat, eps, conv_time, final_norm, max_abs_v, recovery_dev })
}

/// Pointwise comparison of two runs on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    /// `sup_t ‖χ_a(t) − χ_b(t)‖`.
    pub sup_dev: f64,
    /// Column name and `sup_t |a − b|` for each state, chain and estimate
    /// column.
    pub per_column: Vec<(String, f64)>,
}

pub fn compare_records(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<Comparison, MetricsError> {
    check_grids(a, b)?;
    let (n, m) = (a.state_dim, a.chain_len);
    let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    names.extend((1..=m).map(|i| format!("z{i}")));
    names.extend((1..=n).map(|i| format!("xhat{i}")));
    let mut maxes = vec![0.0_f64; names.len()];
    let mut sup_dev = 0.0_f64;
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        let da = diff(&sa.chi(), &sb.chi());
        sup_dev = sup_dev.max(norm2(&da));
        let dh = diff(&sa.xhat, &sb.xhat);
        for (mx, d) in maxes.iter_mut().zip(da.iter().chain(&dh)) {
            *mx = mx.max(d.abs());
        }
    }
    Ok(Comparison { sup_dev, per_column: names.into_iter().zip(maxes).collect() })
}
