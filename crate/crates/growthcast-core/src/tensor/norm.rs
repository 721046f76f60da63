//! Batch normalization: per-channel standardization with learnable affine.
//!
//! The channel axis is axis 0; statistics are taken over all remaining
//! axes of the same tensor (per-forward statistics, no running
//! averages — training here is single-image / single-sample).

use super::{Element, Tensor, TensorError};

/// Saved forward quantities needed by the backward pass.
pub struct BatchNormCache<E: Element> {
    normalized: Tensor<E>,
    inv_std: Vec<E>,
}

impl<E: Element> BatchNormCache<E> {
    /// The standardized activations (mean 0, unit variance per channel).
    pub fn normalized(&self) -> &Tensor<E> {
        &self.normalized
    }
}

fn check_channel_params<E: Element>(
    x: &Tensor<E>,
    gamma: &Tensor<E>,
    beta: &Tensor<E>,
) -> Result<usize, TensorError> {
    let channels = x.shape()[0];
    for p in [gamma, beta] {
        if p.shape() != [channels] {
            return Err(TensorError::ChannelMismatch {
                channels,
                params: p.len(),
            });
        }
    }
    Ok(channels)
}

/// y = gamma * (x - E[x]) / sqrt(Var[x] + eps) + beta, per channel.
pub fn batch_norm<E: Element>(
    x: &Tensor<E>,
    gamma: &Tensor<E>,
    beta: &Tensor<E>,
    eps: E,
) -> Result<(Tensor<E>, BatchNormCache<E>), TensorError> {
    let channels = check_channel_params(x, gamma, beta)?;
    let (y, cache) = standardize_affine(x, channels, Some((gamma, beta)), eps);
    Ok((y, cache))
}

/// Standardize to zero mean / unit variance per channel (fixed gamma=1,
/// beta=0). Used for the response-map normalization.
pub fn standardize<E: Element>(x: &Tensor<E>, eps: E) -> (Tensor<E>, BatchNormCache<E>) {
    let channels = x.shape()[0];
    standardize_affine(x, channels, None, eps)
}

fn standardize_affine<E: Element>(
    x: &Tensor<E>,
    channels: usize,
    affine: Option<(&Tensor<E>, &Tensor<E>)>,
    eps: E,
) -> (Tensor<E>, BatchNormCache<E>) {
    let n = x.len() / channels;
    let n_e = E::from_f64(n as f64);
    let mut normalized = Tensor::zeros(x.shape());
    let mut out = Tensor::zeros(x.shape());
    let mut inv_std = Vec::with_capacity(channels);
    for c in 0..channels {
        let xs = &x.data()[c * n..(c + 1) * n];
        let mean = xs.iter().copied().sum::<E>() / n_e;
        let var = xs
            .iter()
            .map(|&v| {
                let d = v - mean;
                d * d
            })
            .sum::<E>()
            / n_e;
        let is = E::one() / (var + eps).sqrt();
        inv_std.push(is);
        let (g, b) = match affine {
            Some((gamma, beta)) => (gamma.data()[c], beta.data()[c]),
            None => (E::one(), E::zero()),
        };
        let norm = &mut normalized.data_mut()[c * n..(c + 1) * n];
        for (i, &v) in xs.iter().enumerate() {
            norm[i] = (v - mean) * is;
        }
        let o = &mut out.data_mut()[c * n..(c + 1) * n];
        for i in 0..n {
            o[i] = g * normalized.data()[c * n + i] + b;
        }
    }
    (out, BatchNormCache { normalized, inv_std })
}

/// Backward pass of [`batch_norm`]: (d x, d gamma, d beta).
pub fn batch_norm_backward<E: Element>(
    upstream: &Tensor<E>,
    cache: &BatchNormCache<E>,
    gamma: &Tensor<E>,
) -> Result<(Tensor<E>, Tensor<E>, Tensor<E>), TensorError> {
    upstream.check_same_shape(&cache.normalized)?;
    let channels = cache.inv_std.len();
    let n = upstream.len() / channels;
    let n_e = E::from_f64(n as f64);

    let mut dgamma = Tensor::zeros(&[channels]);
    let mut dbeta = Tensor::zeros(&[channels]);
    let mut dx = Tensor::zeros(upstream.shape());
    for c in 0..channels {
        let up = &upstream.data()[c * n..(c + 1) * n];
        let xhat = &cache.normalized.data()[c * n..(c + 1) * n];
        dgamma.data_mut()[c] = up.iter().zip(xhat).map(|(&u, &h)| u * h).sum();
        dbeta.data_mut()[c] = up.iter().copied().sum();

        // dL/dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
        let g = gamma.data()[c];
        let mean_d = up.iter().map(|&u| u * g).sum::<E>() / n_e;
        let mean_dh = up.iter().zip(xhat).map(|(&u, &h)| u * g * h).sum::<E>() / n_e;
        let is = cache.inv_std[c];
        let out = &mut dx.data_mut()[c * n..(c + 1) * n];
        for i in 0..n {
            out[i] = is * (up[i] * g - mean_d - xhat[i] * mean_dh);
        }
    }
    Ok((dx, dgamma, dbeta))
}

/// Backward pass of [`standardize`] (gamma fixed at 1).
pub fn standardize_backward<E: Element>(
    upstream: &Tensor<E>,
    cache: &BatchNormCache<E>,
) -> Result<Tensor<E>, TensorError> {
    let ones = Tensor::full(&[cache.inv_std.len()], E::one());
    let (dx, _, _) = batch_norm_backward(upstream, cache, &ones)?;
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_yields_beta() {
        let x = Tensor::full(&[2, 3, 3], 4.2f64);
        let gamma = Tensor::full(&[2], 1.7);
        let beta = Tensor::from_vec(&[2], vec![0.3, -0.9]).unwrap();
        let (y, _) = batch_norm(&x, &gamma, &beta, 1e-5).unwrap();
        for c in 0..2 {
            for &v in &y.data()[c * 9..(c + 1) * 9] {
                assert!((v - beta.data()[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_point_input_standardizes_to_plus_minus_one() {
        // Mean 0, variance 1 by hand for {-1, +1}.
        let x = Tensor::from_vec(&[1, 1, 2], vec![-1.0f64, 1.0]).unwrap();
        let gamma = Tensor::full(&[1], 1.0);
        let beta = Tensor::zeros(&[1]);
        let (y, _) = batch_norm(&x, &gamma, &beta, 1e-12).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-6);
        assert!((y.data()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn affine_of_standardized_input_is_two_x_plus_three() {
        // x already mean 0 / unit variance, so BN reduces to gamma*x + beta.
        let x = Tensor::from_vec(&[1, 1, 2], vec![-1.0f64, 1.0]).unwrap();
        let gamma = Tensor::full(&[1], 2.0);
        let beta = Tensor::full(&[1], 3.0);
        let (y, _) = batch_norm(&x, &gamma, &beta, 1e-12).unwrap();
        for (got, want) in y.data().iter().zip([1.0, 5.0]) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn output_statistics_are_standard() {
        let mut rng = crate::tensor::RngStream::new(5);
        let x = Tensor::<f64>::from_fn(&[3, 8, 8], |_| rng.normal(2.0, 3.0));
        let gamma = Tensor::full(&[3], 1.0);
        let beta = Tensor::zeros(&[3]);
        let (y, _) = batch_norm(&x, &gamma, &beta, 1e-12).unwrap();
        let n = 64.0;
        for c in 0..3 {
            let ys = &y.data()[c * 64..(c + 1) * 64];
            let mean: f64 = ys.iter().sum::<f64>() / n;
            let var: f64 = ys.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn inverse_affine_recovers_input() {
        let mut rng = crate::tensor::RngStream::new(9);
        let x = Tensor::<f64>::from_fn(&[2, 4, 4], |_| rng.normal(-1.0, 2.5));
        let gamma = Tensor::full(&[2], 1.0);
        let beta = Tensor::zeros(&[2]);
        let (y, _) = batch_norm(&x, &gamma, &beta, 1e-10).unwrap();
        // Undo with the per-channel statistics of x itself.
        let n = 16.0;
        for c in 0..2 {
            let xs = &x.data()[c * 16..(c + 1) * 16];
            let mean: f64 = xs.iter().sum::<f64>() / n;
            let var: f64 = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            for i in 0..16 {
                let rec = y.data()[c * 16 + i] * (var + 1e-10).sqrt() + mean;
                assert!((rec - xs[i]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn rejects_channel_mismatch() {
        let x = Tensor::<f32>::zeros(&[3, 2, 2]);
        let gamma = Tensor::<f32>::zeros(&[2]);
        let beta = Tensor::<f32>::zeros(&[3]);
        assert!(matches!(
            batch_norm(&x, &gamma, &beta, 1e-5),
            Err(TensorError::ChannelMismatch { .. })
        ));
    }
}
