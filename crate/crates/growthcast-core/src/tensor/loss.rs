//! Per-pixel Bernoulli cross-entropy.
//!
//! The two-class form of categorical cross-entropy: predictions come
//! from a sigmoid output, targets are binary urban masks (soft targets
//! in [0,1] are accepted). Predictions are clamped to
//! [DELTA, 1-DELTA] so the logs stay finite; the gradient is zero where
//! the clamp binds, matching the clamped function exactly.

use super::{Element, Tensor, TensorError};

/// Clamp applied to predictions inside the log terms.
pub const CLAMP_DELTA: f64 = 1e-7;

/// Mean over all elements of -[t ln p + (1-t) ln(1-p)].
pub fn cross_entropy<E: Element>(pred: &Tensor<E>, target: &Tensor<E>) -> Result<E, TensorError> {
    pred.check_same_shape(target)?;
    let delta = E::from_f64(CLAMP_DELTA);
    let one = E::one();
    let total: E = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let p = p.max(delta).min(one - delta);
            -(t * p.ln() + (one - t) * (one - p).ln())
        })
        .sum();
    Ok(total / E::from_f64(pred.len() as f64))
}

/// Gradient of [`cross_entropy`] with respect to the predictions.
pub fn cross_entropy_backward<E: Element>(
    pred: &Tensor<E>,
    target: &Tensor<E>,
) -> Result<Tensor<E>, TensorError> {
    pred.check_same_shape(target)?;
    let delta = E::from_f64(CLAMP_DELTA);
    let one = E::one();
    let inv_n = E::one() / E::from_f64(pred.len() as f64);
    pred.zip_map(target, |p, t| {
        if p <= delta || p >= one - delta {
            E::zero()
        } else {
            (p - t) / (p * (one - p)) * inv_n
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confident_correct_prediction_has_near_zero_loss() {
        let t = Tensor::from_vec(&[4], vec![1.0f64, 0.0, 1.0, 0.0]).unwrap();
        let loss = cross_entropy(&t, &t).unwrap();
        assert!(loss <= 2e-7, "loss {loss}");
    }

    #[test]
    fn uniform_prediction_costs_ln_two() {
        let p = Tensor::full(&[2, 3], 0.5f64);
        let t = Tensor::from_vec(&[2, 3], vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let loss = cross_entropy(&p, &t).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let p = Tensor::<f32>::full(&[2], 0.5);
        let t = Tensor::<f32>::full(&[3], 0.5);
        assert!(cross_entropy(&p, &t).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences_on_2x2() {
        let p = Tensor::from_vec(&[2, 2], vec![0.3f64, 0.8, 0.55, 0.12]).unwrap();
        let t = Tensor::from_vec(&[2, 2], vec![1.0f64, 0.0, 1.0, 0.0]).unwrap();
        let analytic = cross_entropy_backward(&p, &t).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut plus = p.clone();
            plus.data_mut()[i] += h;
            let mut minus = p.clone();
            minus.data_mut()[i] -= h;
            let fd = (cross_entropy(&plus, &t).unwrap() - cross_entropy(&minus, &t).unwrap())
                / (2.0 * h);
            let a = analytic.data()[i];
            assert!(
                (a - fd).abs() <= 1e-6 * a.abs().max(1.0),
                "element {i}: analytic {a}, fd {fd}"
            );
        }
    }
}
