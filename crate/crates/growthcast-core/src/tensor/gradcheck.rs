//! Central-difference verification harness for hand-written backward
//! passes. 64-bit only; run it on `Tensor<f64>` copies of the model.

use super::{Tensor, TensorError};

/// Denominator guard for the relative error: below this magnitude the
/// comparison is effectively absolute at guard * tolerance.
pub const DEFAULT_GUARD: f64 = 1e-4;

/// Elementwise (f(w+h) - f(w-h)) / 2h for a scalar-valued `f`.
pub fn central_differences<F>(w: &Tensor<f64>, h: f64, mut f: F) -> Result<Tensor<f64>, TensorError>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let mut probe = w.clone();
    let mut out = Tensor::zeros(w.shape());
    for i in 0..w.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let fp = f(&probe);
        probe.data_mut()[i] = orig - h;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(TensorError::NonFinite("finite_diff_check objective"));
        }
        out.data_mut()[i] = (fp - fm) / (2.0 * h);
    }
    Ok(out)
}

/// Worst elementwise |a - n| / max(|a|, |n|, guard).
pub fn max_relative_error(analytic: &Tensor<f64>, numeric: &Tensor<f64>, guard: f64) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(guard))
        .fold(0.0, f64::max)
}

/// Compare `analytic` gradients of `f` at `w` against central
/// differences; returns the worst relative error.
pub fn finite_diff_check<F>(
    w: &Tensor<f64>,
    analytic: &Tensor<f64>,
    h: f64,
    f: F,
) -> Result<f64, TensorError>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    analytic.check_same_shape(w)?;
    let numeric = central_differences(w, h, f)?;
    Ok(max_relative_error(analytic, &numeric, DEFAULT_GUARD))
}
