//! Xavier (Glorot) uniform initialization.

use super::{Element, RngStream, Tensor, TensorError};

/// Uniform on [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
///
/// Draws in row-major order from `rng`, so a seed fixes the tensor.
pub fn xavier_init<E: Element>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut RngStream,
) -> Result<Tensor<E>, TensorError> {
    if fan_in == 0 || fan_out == 0 {
        return Err(TensorError::ZeroFan);
    }
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Ok(Tensor::from_fn(shape, |_| {
        E::from_f64(rng.uniform_symmetric(a))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_identical_tensors() {
        let a: Tensor<f32> =
            xavier_init(&[4, 4], 16, 16, &mut RngStream::new(77)).unwrap();
        let b: Tensor<f32> =
            xavier_init(&[4, 4], 16, 16, &mut RngStream::new(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_fan_is_an_error() {
        assert!(matches!(
            xavier_init::<f32>(&[2], 0, 3, &mut RngStream::new(0)),
            Err(TensorError::ZeroFan)
        ));
    }

    #[test]
    fn samples_lie_in_support_and_match_uniform_moments() {
        let (fan_in, fan_out) = (50, 50);
        let n = 100_000;
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let t: Tensor<f64> =
            xavier_init(&[n], fan_in, fan_out, &mut RngStream::new(123)).unwrap();
        assert!(t.data().iter().all(|&v| (-a..=a).contains(&v)));

        let mean = t.sum() / n as f64;
        // Variance of U(-a,a) is a^2/3 = 2/(fan_in+fan_out).
        let var = t.data().iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let target_var = 2.0 / (fan_in + fan_out) as f64;
        let sigma_mean = (target_var / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}");
        assert!(
            (var - target_var).abs() < 0.05 * target_var,
            "var {var} vs {target_var}"
        );
    }
}
