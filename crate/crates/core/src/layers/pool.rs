//! Max pooling without padding. Ties go to the lowest linear index.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolSpec {
    pub pool_h: usize,
    pub pool_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

impl PoolSpec {
    pub fn new(pool_h: usize, pool_w: usize, stride_h: usize, stride_w: usize) -> Self {
        Self {
            pool_h,
            pool_w,
            stride_h,
            stride_w,
        }
    }
}

pub fn maxpool_output_hw(h: usize, w: usize, spec: PoolSpec) -> Result<(usize, usize)> {
    if spec.stride_h == 0 || spec.stride_w == 0 || spec.pool_h == 0 || spec.pool_w == 0 {
        return Err(Error::param("pool sizes and strides must be at least 1"));
    }
    if spec.pool_h > h || spec.pool_w > w {
        return Err(Error::shape(format!(
            "pool window {}×{} exceeds input {h}×{w}",
            spec.pool_h, spec.pool_w
        )));
    }
    Ok(((h - spec.pool_h) / spec.stride_h + 1, (w - spec.pool_w) / spec.stride_w + 1))
}

/// Pooled output plus, for each output cell, the linear input index it came from.
pub fn maxpool(input: &Tensor, spec: PoolSpec) -> Result<(Tensor, Vec<usize>)> {
    let &[c, h, w] = input.dims() else {
        return Err(Error::shape(format!("maxpool input must be C×H×W, got {:?}", input.dims())));
    };
    let (oh_n, ow_n) = maxpool_output_hw(h, w, spec)?;
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh_n * ow_n);
    let mut argmax = Vec::with_capacity(out.capacity());
    for ch in 0..c {
        for oh in 0..oh_n {
            for ow in 0..ow_n {
                let mut best = usize::MAX;
                // Row-major scan with strict `>` keeps the lowest index on ties.
                for ph in 0..spec.pool_h {
                    let row = (ch * h + oh * spec.stride_h + ph) * w + ow * spec.stride_w;
                    for idx in row..row + spec.pool_w {
                        if best == usize::MAX || x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![c, oh_n, ow_n], out)?, argmax))
}

/// Smallest gap between the largest and second-largest value over all pooling
/// windows. Finite-difference probes smaller than half this gap cannot flip
/// an argmax.
pub fn maxpool_min_gap(input: &Tensor, spec: PoolSpec) -> Result<f64> {
    let &[c, h, w] = input.dims() else {
        return Err(Error::shape(format!("maxpool input must be C×H×W, got {:?}", input.dims())));
    };
    let (oh_n, ow_n) = maxpool_output_hw(h, w, spec)?;
    let x = input.data();
    let mut gap = f64::INFINITY;
    for ch in 0..c {
        for oh in 0..oh_n {
            for ow in 0..ow_n {
                let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for ph in 0..spec.pool_h {
                    let row = (ch * h + oh * spec.stride_h + ph) * w + ow * spec.stride_w;
                    for &v in &x[row..row + spec.pool_w] {
                        if v > first {
                            second = first;
                            first = v;
                        } else if v > second {
                            second = v;
                        }
                    }
                }
                gap = gap.min(first - second);
            }
        }
    }
    Ok(gap)
}

pub fn maxpool_backward(input_dims: &[usize], argmax: &[usize], upstream: &Tensor) -> Result<Tensor> {
    if upstream.len() != argmax.len() {
        return Err(Error::shape(format!(
            "maxpool upstream has {} values for {} pooled cells",
            upstream.len(),
            argmax.len()
        )));
    }
    let mut grad = Tensor::zeros(input_dims);
    let g = grad.data_mut();
    for (&idx, &u) in argmax.iter().zip(upstream.data()) {
        g[idx] += u;
    }
    Ok(grad)
}
