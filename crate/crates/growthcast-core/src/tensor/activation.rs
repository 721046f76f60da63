//! Elementwise activations and their derivatives.

use super::{Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

#[inline]
pub(crate) fn sigmoid<E: Element>(x: E) -> E {
    E::one() / (E::one() + (-x).exp())
}

/// Apply `kind` elementwise.
pub fn activate<E: Element>(x: &Tensor<E>, kind: Activation) -> Tensor<E> {
    match kind {
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Tanh => x.map(|v| v.tanh()),
        Activation::Relu => x.map(|v| if v > E::zero() { v } else { E::zero() }),
    }
}

/// Chain `upstream` through the derivative of `kind` at the saved input `x`.
pub fn activate_backward<E: Element>(
    upstream: &Tensor<E>,
    x: &Tensor<E>,
    kind: Activation,
) -> Tensor<E> {
    let d = match kind {
        Activation::Sigmoid => x.map(|v| {
            let s = sigmoid(v);
            s * (E::one() - s)
        }),
        Activation::Tanh => x.map(|v| {
            let t = v.tanh();
            E::one() - t * t
        }),
        Activation::Relu => x.map(|v| if v > E::zero() { E::one() } else { E::zero() }),
    };
    upstream.zip_map(&d, |u, dv| u * dv).expect("same shape by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        let x = Tensor::from_vec(&[3], vec![0.0f64, 0.0, -2.0]).unwrap();
        assert_eq!(activate(&x, Activation::Sigmoid).data()[0], 0.5);
        assert_eq!(activate(&x, Activation::Tanh).data()[1], 0.0);
        assert_eq!(activate(&x, Activation::Relu).data()[2], 0.0);
    }

    #[test]
    fn ranges() {
        let x = Tensor::from_fn(&[101], |i| (i as f64 - 50.0) / 5.0);
        let s = activate(&x, Activation::Sigmoid);
        assert!(s.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let t = activate(&x, Activation::Tanh);
        assert!(t.data().iter().all(|&v| v > -1.0 && v < 1.0));
        let r = activate(&x, Activation::Relu);
        assert!(r.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sigmoid_derivative_at_zero_matches_finite_difference() {
        // sigma'(0) = 0.25.
        let h = 1e-6f64;
        let fd = (super::sigmoid(h) - super::sigmoid(-h)) / (2.0 * h);
        let x = Tensor::from_vec(&[1], vec![0.0f64]).unwrap();
        let up = Tensor::from_vec(&[1], vec![1.0f64]).unwrap();
        let analytic = activate_backward(&up, &x, Activation::Sigmoid).data()[0];
        assert!((analytic - 0.25).abs() < 1e-12);
        assert!((analytic - fd).abs() < 1e-8);
    }
}
