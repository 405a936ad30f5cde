//! Central-difference gradient verification. Every hand-derived backward
//! pass in this crate is checked against this harness.

use super::TensorError;

/// Compares an analytic gradient against central differences of `loss` and
/// returns the maximum relative error over all coordinates:
/// |g_a − g_fd| / max(1e-8, |g_a| + |g_fd|).
///
/// `loss` must be a pure, deterministic function of the parameter vector.
pub fn finite_difference_check<F>(
    mut loss: F,
    params: &[f64],
    analytic_grad: &[f64],
    eps: f64,
) -> Result<f64, TensorError>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic_grad.len() {
        return Err(TensorError::Shape {
            op: "finite_difference_check",
            detail: format!(
                "{} parameters but {} gradient entries",
                params.len(),
                analytic_grad.len()
            ),
        });
    }
    let mut work = params.to_vec();
    let mut max_rel = 0.0f64;
    for i in 0..work.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let plus = loss(&work);
        work[i] = orig - eps;
        let minus = loss(&work);
        work[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(TensorError::NonFinite {
                op: "finite_difference_check",
            });
        }
        let fd = (plus - minus) / (2.0 * eps);
        let ga = analytic_grad[i];
        let rel = (ga - fd).abs() / (ga.abs() + fd.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
