use super::StepError;

/// One classical fourth-order Runge–Kutta step.
///
/// `rhs` may fail; a non-finite stage derivative is reported with its
/// stage index (1–4).
pub fn rk4_step<F>(mut rhs: F, state: &[f64], t: f64, dt: f64) -> Result<Vec<f64>, StepError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, StepError>,
{
    let n = state.len();
    let mut eval = |stage: usize, t: f64, y: &[f64]| -> Result<Vec<f64>, StepError> {
        let d = rhs(t, y)?;
        if d.len() != n {
            return Err(StepError::Dimension(format!(
                "stage {stage} derivative has {} entries, state has {n}",
                d.len()
            )));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(StepError::NonFiniteDerivative { stage });
        }
        Ok(d)
    };
    let axpy = |h: f64, k: &[f64]| -> Vec<f64> { state.iter().zip(k).map(|(y, k)| y + h * k).collect() };

    let k1 = eval(1, t, state)?;
    let k2 = eval(2, t + 0.5 * dt, &axpy(0.5 * dt, &k1))?;
    let k3 = eval(3, t + 0.5 * dt, &axpy(0.5 * dt, &k2))?;
    let k4 = eval(4, t + dt, &axpy(dt, &k3))?;

    Ok((0..n).map(|i| state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}
