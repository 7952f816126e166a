use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{dot_lanes, LayerGrad, Tensor};

fn check(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    let &[k, d] = weight.dims() else {
        return Err(Error::shape(format!("fc weight must be K×D, got {:?}", weight.dims())));
    };
    if input.len() != d {
        return Err(Error::shape(format!("fc input has {} values, weight expects {d}", input.len())));
    }
    bias.expect_dims(&[k], "fc bias")?;
    Ok((k, d))
}

/// `W·x + b`. The input may have any shape; it is read flat.
pub fn fully_connected(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (k, d) = check(input, weight, bias)?;
    let x = input.data();
    let w = weight.data();
    let out = (0..k)
        .map(|row| dot_lanes(&w[row * d..(row + 1) * d], x) + bias.data()[row])
        .collect();
    Ok(Tensor::from_vec(out))
}

/// Accumulates `g ⊗ x` into `weight_grad` and `g` into `bias_grad`; writes
/// `Wᵀ g` into `input_grad` when requested.
pub(crate) fn fc_backward_into(
    input: &[f64],
    weight: &Tensor,
    upstream: &[f64],
    input_grad: Option<&mut [f64]>,
    weight_grad: &mut [f64],
    bias_grad: &mut [f64],
) {
    let d = input.len();
    let w = weight.data();
    for (row, &g) in upstream.iter().enumerate() {
        bias_grad[row] += g;
        if g == 0.0 {
            continue;
        }
        for (wg, &x) in weight_grad[row * d..(row + 1) * d].iter_mut().zip(input) {
            *wg += g * x;
        }
    }
    if let Some(ig) = input_grad {
        ig.fill(0.0);
        for (row, &g) in upstream.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (acc, &wv) in ig.iter_mut().zip(&w[row * d..(row + 1) * d]) {
                *acc += g * wv;
            }
        }
    }
}

pub fn fc_backward(input: &Tensor, weight: &Tensor, bias: &Tensor, upstream: &Tensor) -> Result<LayerGrad> {
    let (k, _) = check(input, weight, bias)?;
    upstream.expect_dims(&[k], "fc upstream gradient")?;
    let mut input_grad = Tensor::zeros(input.dims());
    let mut weight_grad = Tensor::zeros(weight.dims());
    let mut bias_grad = Tensor::zeros(bias.dims());
    fc_backward_into(
        input.data(),
        weight,
        upstream.data(),
        Some(input_grad.data_mut()),
        weight_grad.data_mut(),
        bias_grad.data_mut(),
    );
    let mut param_grads = BTreeMap::new();
    param_grads.insert("weight".to_string(), weight_grad);
    param_grads.insert("bias".to_string(), bias_grad);
    Ok(LayerGrad { input_grad, param_grads })
}
