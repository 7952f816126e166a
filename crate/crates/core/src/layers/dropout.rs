//! Inverted dropout: survivors are scaled by `1/(1−rate)` at train time so
//! evaluation is the identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-element multiplier: 0 for dropped, `1/(1−rate)` for kept.
pub type DropoutMask = Vec<f64>;

pub fn dropout_mask(len: usize, rate: f64, seed: u64) -> Result<DropoutMask> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::param(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    let keep = 1.0 / (1.0 - rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

pub fn dropout(input: &Tensor, rate: f64, mode: Mode, seed: u64) -> Result<(Tensor, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::param(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((input.clone(), vec![1.0; input.len()]));
    }
    let mask = dropout_mask(input.len(), rate, seed)?;
    let data = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((Tensor::new(input.dims().to_vec(), data)?, mask))
}

pub fn dropout_backward(upstream: &Tensor, mask: &[f64]) -> Result<Tensor> {
    if mask.len() != upstream.len() {
        return Err(Error::shape("dropout mask length differs from upstream gradient"));
    }
    let data = upstream.data().iter().zip(mask).map(|(g, m)| g * m).collect();
    Tensor::new(upstream.dims().to_vec(), data)
}
