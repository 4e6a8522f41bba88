//! Central-difference verification of analytic gradients.

use crate::tensor::Tensor;

/// Step used by the model-level checks.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Pass threshold on the maximum relative error.
pub const TOLERANCE: f64 = 1e-4;

/// Compares the analytic gradient returned by `f` at `params` with central
/// differences, coordinate by coordinate.
///
/// `f` returns the scalar value and its analytic gradient; only the value is
/// used at perturbed points. The result is
/// `max_k |analytic_k − numeric_k| / max(1, |analytic_k|)`.
///
/// ```
/// use lambda_nli::gradcheck::grad_check;
/// use lambda_nli::tensor::Tensor;
///
/// let x = Tensor::row_vector(vec![3.0]);
/// let err = grad_check(|p| {
///     let v = p.data()[0];
///     (v * v, Tensor::row_vector(vec![2.0 * v]))
/// }, &x, 1e-5);
/// assert!(err < 1e-9);
/// ```
pub fn grad_check<F>(mut f: F, params: &Tensor, eps: f64) -> f64
where
    F: FnMut(&Tensor) -> (f64, Tensor),
{
    let (_, analytic) = f(params);
    assert_eq!(analytic.shape(), params.shape(), "gradient shape must match params");
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for k in 0..params.len() {
        let orig = params.data()[k];
        probe.data_mut()[k] = orig + eps;
        let (plus, _) = f(&probe);
        probe.data_mut()[k] = orig - eps;
        let (minus, _) = f(&probe);
        probe.data_mut()[k] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.data()[k];
        let rel = (a - numeric).abs() / a.abs().max(1.0);
        worst = if rel.is_nan() { f64::INFINITY } else { worst.max(rel) };
    }
    worst
}
