use super::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f32 = 0.5;
pub const DEFAULT_BETA2: f32 = 0.999;
pub const DEFAULT_EPSILON: f32 = 1e-7;

/// Per-parameter Adam moments. The step counter `t` counts applied updates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub t: u32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub lr: f32,
}

impl AdamState {
    /// Fresh state with decay rates 0.5 / 0.999 and epsilon 1e-7.
    pub fn new(shape: &[usize], lr: f32) -> Self {
        Self {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            t: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            lr,
        }
    }
}

/// One Adam update. Note that epsilon sits inside the square root:
/// `w ← w − lr · m̂ / sqrt(v̂ + ε)`.
pub fn adam_step(param: &mut Tensor, grad: &Tensor, state: &mut AdamState) -> Result<()> {
    if grad.shape() != param.shape() || state.m.shape() != param.shape() || state.v.shape() != param.shape() {
        return Err(Error::dim(
            "adam_step",
            format!("param, grad and moments of shape {:?}", param.shape()),
            format!(
                "grad {:?}, m {:?}, v {:?}",
                grad.shape(),
                state.m.shape(),
                state.v.shape()
            ),
        ));
    }
    state.t += 1;
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.epsilon, state.lr);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let w = param.data_mut();
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (i, &g) in grad.data().iter().enumerate() {
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        w[i] -= lr * m_hat / (v_hat + eps).sqrt();
    }
    Ok(())
}
