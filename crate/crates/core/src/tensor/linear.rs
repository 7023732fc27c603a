use super::{axpy, dot, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// `out[j] = bias[j] + sum_i weight[j, i] * input[i]`
pub(crate) fn linear_raw(input: &[f32], weight: &[f32], bias: &[f32], out: &mut [f32]) {
    let n_in = input.len();
    for (j, o) in out.iter_mut().enumerate() {
        *o = bias[j] + dot(&weight[j * n_in..(j + 1) * n_in], input);
    }
}

pub(crate) fn linear_backward_raw(
    grad_out: &[f32],
    input: &[f32],
    weight: &[f32],
    grads: Option<(&mut [f32], &mut [f32])>,
    grad_input: Option<&mut [f32]>,
) {
    let n_in = input.len();
    if let Some((gw, gb)) = grads {
        for (j, &g) in grad_out.iter().enumerate() {
            gb[j] += g;
            axpy(&mut gw[j * n_in..(j + 1) * n_in], g, input);
        }
    }
    if let Some(gi) = grad_input {
        for (j, &g) in grad_out.iter().enumerate() {
            axpy(gi, g, &weight[j * n_in..(j + 1) * n_in]);
        }
    }
}

fn check(op: &'static str, input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    input.expect_rank(op, 1)?;
    weight.expect_rank(op, 2)?;
    let (n_out, n_in) = (weight.shape()[0], weight.shape()[1]);
    if input.len() != n_in {
        return Err(Error::dim(
            op,
            format!("input of length {n_in} for weight {:?}", weight.shape()),
            format!("{:?}", input.shape()),
        ));
    }
    bias.expect_shape(op, &[n_out])?;
    Ok((n_out, n_in))
}

pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n_out, _) = check("linear", input, weight, bias)?;
    let mut out = Tensor::zeros([n_out]);
    linear_raw(input.data(), weight.data(), bias.data(), out.data_mut());
    Ok(out)
}

pub fn linear_backward(grad_out: &Tensor, saved_input: &Tensor, weight: &Tensor) -> Result<LinearGrads> {
    let n_out = weight.shape().first().copied().unwrap_or(0);
    let bias = Tensor::zeros([n_out.max(1)]);
    check("linear_backward", saved_input, weight, &bias)?;
    grad_out.expect_shape("linear_backward", &[n_out])?;
    let mut grads = LinearGrads {
        input: saved_input.zeros_like(),
        weight: weight.zeros_like(),
        bias,
    };
    linear_backward_raw(
        grad_out.data(),
        saved_input.data(),
        weight.data(),
        Some((grads.weight.data_mut(), grads.bias.data_mut())),
        Some(grads.input.data_mut()),
    );
    Ok(grads)
}
