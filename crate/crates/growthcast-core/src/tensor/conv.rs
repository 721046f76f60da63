//! 2D convolution with same-size zero padding.
//!
//! Cross-correlation convention (no kernel flip), which is what the
//! hand oracles in the tests assume. Spatial dimensions are preserved:
//! odd kernels, zero padding of (kh/2, kw/2).

use super::{Element, Tensor, TensorError};
use crate::exec;

/// Gradients of [`conv2d`] with respect to its three inputs.
pub struct Conv2dGrads<E: Element> {
    pub input: Tensor<E>,
    pub kernels: Tensor<E>,
    pub bias: Tensor<E>,
}

fn check_conv_shapes<E: Element>(
    input: &Tensor<E>,
    kernels: &Tensor<E>,
    bias: &Tensor<E>,
) -> Result<(usize, usize, usize, usize, usize, usize), TensorError> {
    if input.rank() != 3 {
        return Err(TensorError::Rank {
            expected: 3,
            got: input.rank(),
        });
    }
    if kernels.rank() != 4 {
        return Err(TensorError::Rank {
            expected: 4,
            got: kernels.rank(),
        });
    }
    let (cin, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (cout, kcin, kh, kw) = (
        kernels.shape()[0],
        kernels.shape()[1],
        kernels.shape()[2],
        kernels.shape()[3],
    );
    if kcin != cin {
        return Err(TensorError::ShapeMismatch {
            expected: vec![cout, cin, kh, kw],
            got: kernels.shape().to_vec(),
        });
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(TensorError::EvenKernel { kh, kw });
    }
    if bias.shape() != [cout] {
        return Err(TensorError::ShapeMismatch {
            expected: vec![cout],
            got: bias.shape().to_vec(),
        });
    }
    Ok((cin, h, w, cout, kh, kw))
}

/// `input` [Cin,H,W] * `kernels` [Cout,Cin,kh,kw] + `bias` [Cout] -> [Cout,H,W].
pub fn conv2d<E: Element>(
    input: &Tensor<E>,
    kernels: &Tensor<E>,
    bias: &Tensor<E>,
) -> Result<Tensor<E>, TensorError> {
    let (cin, h, w, cout, kh, kw) = check_conv_shapes(input, kernels, bias)?;
    let (ph, pw) = (kh / 2, kw / 2);
    let x = input.data();
    let k = kernels.data();
    let b = bias.data();

    let mut out = Tensor::zeros(&[cout, h, w]);
    // One output channel per task; each output element is an independent
    // gather, so the parallel result is bit-identical to sequential.
    exec::for_each_chunk_mut(out.data_mut(), h * w, |co, plane| {
        let kbase = co * cin * kh * kw;
        for oy in 0..h {
            for ox in 0..w {
                let mut acc = b[co];
                for ci in 0..cin {
                    for dy in 0..kh {
                        let iy = oy + dy;
                        if iy < ph || iy >= h + ph {
                            continue;
                        }
                        let iy = iy - ph;
                        for dx in 0..kw {
                            let ix = ox + dx;
                            if ix < pw || ix >= w + pw {
                                continue;
                            }
                            let ix = ix - pw;
                            acc += x[(ci * h + iy) * w + ix]
                                * k[kbase + (ci * kh + dy) * kw + dx];
                        }
                    }
                }
                plane[oy * w + ox] = acc;
            }
        }
    });
    Ok(out)
}

/// Backward pass of [`conv2d`]: gradients for input, kernels, and bias.
pub fn conv2d_backward<E: Element>(
    upstream: &Tensor<E>,
    input: &Tensor<E>,
    kernels: &Tensor<E>,
) -> Result<Conv2dGrads<E>, TensorError> {
    let bias_probe = Tensor::zeros(&[kernels.shape()[0]]);
    let (cin, h, w, cout, kh, kw) = check_conv_shapes(input, kernels, &bias_probe)?;
    if upstream.shape() != [cout, h, w] {
        return Err(TensorError::ShapeMismatch {
            expected: vec![cout, h, w],
            got: upstream.shape().to_vec(),
        });
    }
    let (ph, pw) = (kh / 2, kw / 2);
    let up = upstream.data();
    let x = input.data();
    let k = kernels.data();

    // d input: gather over output channels and kernel taps.
    let mut grad_input = Tensor::zeros(&[cin, h, w]);
    exec::for_each_chunk_mut(grad_input.data_mut(), h * w, |ci, plane| {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = E::zero();
                for co in 0..cout {
                    let kbase = (co * cin + ci) * kh * kw;
                    for dy in 0..kh {
                        let oy = y + ph;
                        if oy < dy || oy - dy >= h {
                            continue;
                        }
                        let oy = oy - dy;
                        for dx in 0..kw {
                            let ox = xx + pw;
                            if ox < dx || ox - dx >= w {
                                continue;
                            }
                            let ox = ox - dx;
                            acc += up[(co * h + oy) * w + ox] * k[kbase + dy * kw + dx];
                        }
                    }
                }
                plane[y * w + xx] = acc;
            }
        }
    });

    // d kernels: one output channel per task, each tap an independent sum.
    let mut grad_kernels = Tensor::zeros(kernels.shape());
    exec::for_each_chunk_mut(grad_kernels.data_mut(), cin * kh * kw, |co, kplane| {
        for ci in 0..cin {
            for dy in 0..kh {
                for dx in 0..kw {
                    let mut acc = E::zero();
                    for oy in 0..h {
                        let iy = oy + dy;
                        if iy < ph || iy >= h + ph {
                            continue;
                        }
                        let iy = iy - ph;
                        for ox in 0..w {
                            let ix = ox + dx;
                            if ix < pw || ix >= w + pw {
                                continue;
                            }
                            let ix = ix - pw;
                            acc += up[(co * h + oy) * w + ox] * x[(ci * h + iy) * w + ix];
                        }
                    }
                    kplane[(ci * kh + dy) * kw + dx] = acc;
                }
            }
        }
    });

    // d bias: per-channel sum of upstream.
    let grad_bias = Tensor::from_fn(&[cout], |co| {
        up[co * h * w..(co + 1) * h * w].iter().copied().sum()
    });

    Ok(Conv2dGrads {
        input: grad_input,
        kernels: grad_kernels,
        bias: grad_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t<E: Element>(shape: &[usize], data: Vec<E>) -> Tensor<E> {
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let input = t(&[1, 3, 3], (1..=9).map(|v| v as f32).collect());
        let kernels = t(&[1, 1, 1, 1], vec![1.0f32]);
        let bias = t(&[1], vec![0.0f32]);
        let out = conv2d(&input, &kernels, &bias).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn ones_kernel_counts_overlap_under_zero_padding() {
        let input = Tensor::full(&[1, 3, 3], 1.0f32);
        let kernels = Tensor::full(&[1, 1, 3, 3], 1.0f32);
        let bias = t(&[1], vec![0.0f32]);
        let out = conv2d(&input, &kernels, &bias).unwrap();
        let d = out.data();
        assert_eq!(d[4], 9.0); // center sees the full window
        for corner in [0, 2, 6, 8] {
            assert_eq!(d[corner], 4.0); // corners see a 2x2 overlap
        }
        for edge in [1, 3, 5, 7] {
            assert_eq!(d[edge], 6.0);
        }
    }

    #[test]
    fn one_by_one_kernel_sums_channels() {
        let input = Tensor::full(&[2, 4, 4], 1.0f32);
        let kernels = t(&[1, 2, 1, 1], vec![1.0f32, 1.0]);
        let bias = t(&[1], vec![0.0f32]);
        let out = conv2d(&input, &kernels, &bias).unwrap();
        assert!(out.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn rejects_even_kernels_and_channel_mismatch() {
        let input = Tensor::<f32>::zeros(&[1, 4, 4]);
        let bias = Tensor::<f32>::zeros(&[1]);
        let even = Tensor::<f32>::zeros(&[1, 1, 2, 2]);
        assert!(matches!(
            conv2d(&input, &even, &bias),
            Err(TensorError::EvenKernel { .. })
        ));
        let wrong_cin = Tensor::<f32>::zeros(&[1, 3, 3, 3]);
        assert!(matches!(
            conv2d(&input, &wrong_cin, &bias),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn scalar_backward_is_the_product_rule() {
        // 1x1x1 input x, 1x1 kernel w: d/dw = upstream * x, d/dx = upstream * w.
        let x = t(&[1, 1, 1], vec![3.0f64]);
        let w = t(&[1, 1, 1, 1], vec![-2.0f64]);
        let up = t(&[1, 1, 1], vec![5.0f64]);
        let g = conv2d_backward(&up, &x, &w).unwrap();
        assert_eq!(g.kernels.data(), &[15.0]);
        assert_eq!(g.input.data(), &[-10.0]);
        assert_eq!(g.bias.data(), &[5.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let x = Tensor::full(&[2, 4, 4], 0.7f32);
        let w = Tensor::full(&[3, 2, 3, 3], 0.1f32);
        let up = Tensor::zeros(&[3, 4, 4]);
        let g = conv2d_backward(&up, &x, &w).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.kernels.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_is_linear_in_input() {
        let mut rng = crate::tensor::RngStream::new(11);
        let x = Tensor::<f64>::from_fn(&[2, 5, 5], |_| rng.uniform_symmetric(1.0));
        let y = Tensor::<f64>::from_fn(&[2, 5, 5], |_| rng.uniform_symmetric(1.0));
        let k = Tensor::<f64>::from_fn(&[3, 2, 3, 3], |_| rng.uniform_symmetric(1.0));
        let b = Tensor::<f64>::zeros(&[3]);
        let (a, c) = (1.7, -0.4);
        let lhs = conv2d(
            &x.zip_map(&y, |xv, yv| a * xv + c * yv).unwrap(),
            &k,
            &b,
        )
        .unwrap();
        let cx = conv2d(&x, &k, &b).unwrap();
        let cy = conv2d(&y, &k, &b).unwrap();
        for i in 0..lhs.len() {
            let want = a * cx.data()[i] + c * cy.data()[i];
            assert!((lhs.data()[i] - want).abs() <= 1e-6 * want.abs().max(1.0));
        }
    }
}
