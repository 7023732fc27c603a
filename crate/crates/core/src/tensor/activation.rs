use super::Tensor;
use crate::error::Result;

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes the upstream gradient where the forward input was positive.
pub fn relu_backward(grad_out: &Tensor, saved_input: &Tensor) -> Result<Tensor> {
    grad_out.expect_shape("relu_backward", saved_input.shape())?;
    let mut g = grad_out.clone();
    relu_backward_in_place(g.data_mut(), saved_input.data());
    Ok(g)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f32::tanh)
}

/// Takes the forward *output* `y = tanh(x)`; the local derivative is `1 − y²`.
pub fn tanh_backward(grad_out: &Tensor, saved_output: &Tensor) -> Result<Tensor> {
    grad_out.expect_shape("tanh_backward", saved_output.shape())?;
    let mut g = grad_out.clone();
    tanh_backward_in_place(g.data_mut(), saved_output.data());
    Ok(g)
}

pub(crate) fn relu_in_place(x: &mut [f32]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

pub(crate) fn relu_backward_in_place(grad: &mut [f32], input: &[f32]) {
    for (g, &x) in grad.iter_mut().zip(input) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
}

pub(crate) fn tanh_backward_in_place(grad: &mut [f32], output: &[f32]) {
    for (g, &y) in grad.iter_mut().zip(output) {
        *g *= 1.0 - y * y;
    }
}
