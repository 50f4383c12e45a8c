use serde::{Deserialize, Serialize};

use super::{NnError, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators, one buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
    pub t: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(shapes: impl IntoIterator<Item = usize>) -> Self {
        let m: Vec<Vec<F>> = shapes.into_iter().map(|n| vec![F::zero(); n]).collect();
        Self {
            v: m.clone(),
            m,
            t: 0,
        }
    }
}

/// One bias-corrected ADAM update over every tensor in `params`.
///
/// Gradients are checked before anything is written, so a rejected step
/// leaves both the parameters and the state untouched.
pub fn adam_step<F: Scalar>(
    params: &mut [&mut [F]],
    grads: &[&[F]],
    state: &mut AdamState<F>,
    hyper: &AdamHyper,
) -> Result<(), NnError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(NnError::DimensionMismatch {
            what: "adam tensor count",
            expected: state.m.len(),
            actual: grads.len(),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(NnError::DimensionMismatch {
                what: "adam tensor",
                expected: p.len(),
                actual: g.len(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteGradient);
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let b1 = F::of(hyper.beta1);
    let b2 = F::of(hyper.beta2);
    let one = F::one();
    let c1 = F::of(1.0 - hyper.beta1.powi(t));
    let c2 = F::of(1.0 - hyper.beta2.powi(t));
    let lr = F::of(hyper.lr);
    let eps = F::of(hyper.eps);

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = b1 * m[k] + (one - b1) * gk;
            v[k] = b2 * v[k] + (one - b2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] = p[k] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
