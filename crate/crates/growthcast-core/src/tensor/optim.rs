//! Parameter update rules: heavy-ball SGD and Adam.

use super::{Element, Parameter};

/// v <- momentum * v + grad; value <- value - lr * v.
pub fn sgd_momentum_step<E: Element>(p: &mut Parameter<E>, lr: E, momentum: E) {
    for i in 0..p.value.len() {
        let g = p.grad.data()[i];
        let v = momentum * p.m.data()[i] + g;
        p.m.data_mut()[i] = v;
        p.value.data_mut()[i] -= lr * v;
    }
}

/// Bias-corrected adaptive-moment update; `t` is the 1-based step index.
pub fn adam_step<E: Element>(
    p: &mut Parameter<E>,
    lr: E,
    beta1: E,
    beta2: E,
    eps: E,
    t: u64,
) {
    debug_assert!(t >= 1);
    let one = E::one();
    let bc1 = one - beta1.powi(t as i32);
    let bc2 = one - beta2.powi(t as i32);
    for i in 0..p.value.len() {
        let g = p.grad.data()[i];
        let m = beta1 * p.m.data()[i] + (one - beta1) * g;
        let v = beta2 * p.v.data()[i] + (one - beta2) * g * g;
        p.m.data_mut()[i] = m;
        p.v.data_mut()[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        p.value.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
