//! 2-D cross-correlation over `C×H×W` inputs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{dot_lanes, LayerGrad, Tensor};

/// Padding and stride of a convolution. Padding is symmetric per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub pad_h: usize,
    pub pad_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

impl Conv2dSpec {
    pub fn new(pad_h: usize, pad_w: usize, stride_h: usize, stride_w: usize) -> Self {
        Self {
            pad_h,
            pad_w,
            stride_h,
            stride_w,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    fh: usize,
    fw: usize,
    out_h: usize,
    out_w: usize,
    spec: Conv2dSpec,
}

impl Geometry {
    fn new(input: &[usize], filters: &[usize], spec: Conv2dSpec) -> Result<Self> {
        let &[c_in, h, w] = input else {
            return Err(Error::shape(format!("conv2d input must be C×H×W, got {input:?}")));
        };
        let &[c_out, f_c_in, fh, fw] = filters else {
            return Err(Error::shape(format!(
                "conv2d filters must be Cout×Cin×FH×FW, got {filters:?}"
            )));
        };
        if f_c_in != c_in {
            return Err(Error::shape(format!(
                "conv2d: input has {c_in} channels but filters expect {f_c_in}"
            )));
        }
        let (out_h, out_w) = conv2d_output_hw(h, w, fh, fw, spec)?;
        Ok(Self {
            c_in,
            h,
            w,
            c_out,
            fh,
            fw,
            out_h,
            out_w,
            spec,
        })
    }

    /// Input row for output row `oh` and filter row `fh`, if inside the image.
    #[inline]
    fn in_row(&self, oh: usize, fh: usize) -> Option<usize> {
        let ih = (oh * self.spec.stride_h + fh) as isize - self.spec.pad_h as isize;
        (ih >= 0 && (ih as usize) < self.h).then_some(ih as usize)
    }

    /// Half-open range of output columns whose tap `fw` lands inside the image.
    #[inline]
    fn out_cols(&self, fw: usize) -> (usize, usize) {
        let sw = self.spec.stride_w as isize;
        let offset = fw as isize - self.spec.pad_w as isize;
        // iw = ow*sw + offset must satisfy 0 <= iw < w
        let lo = if offset >= 0 { 0 } else { (-offset + sw - 1) / sw };
        let hi_excl = {
            let limit = self.w as isize - offset; // ow*sw < limit
            if limit <= 0 {
                0
            } else {
                (limit + sw - 1) / sw
            }
        };
        let hi = hi_excl.min(self.out_w as isize).max(lo);
        (lo as usize, hi as usize)
    }

    #[inline]
    fn in_col(&self, ow: usize, fw: usize) -> usize {
        ow * self.spec.stride_w + fw - self.spec.pad_w
    }
}

/// Output spatial extent of a convolution; errors when the filter does not
/// fit inside the padded input or a stride is zero.
pub fn conv2d_output_hw(
    h: usize,
    w: usize,
    fh: usize,
    fw: usize,
    spec: Conv2dSpec,
) -> Result<(usize, usize)> {
    if spec.stride_h == 0 || spec.stride_w == 0 {
        return Err(Error::param("conv2d strides must be at least 1"));
    }
    if fh == 0 || fw == 0 || fh > h + 2 * spec.pad_h || fw > w + 2 * spec.pad_w {
        return Err(Error::shape(format!(
            "conv2d filter {fh}×{fw} does not fit padded input {}×{}",
            h + 2 * spec.pad_h,
            w + 2 * spec.pad_w
        )));
    }
    Ok((
        (h + 2 * spec.pad_h - fh) / spec.stride_h + 1,
        (w + 2 * spec.pad_w - fw) / spec.stride_w + 1,
    ))
}

pub fn conv2d(input: &Tensor, filters: &Tensor, bias: &Tensor, spec: Conv2dSpec) -> Result<Tensor> {
    let g = Geometry::new(input.dims(), filters.dims(), spec)?;
    bias.expect_dims(&[g.c_out], "conv2d bias")?;
    let x = input.data();
    let f = filters.data();
    let mut out = vec![0.0; g.c_out * g.out_h * g.out_w];
    let plane = g.out_h * g.out_w;
    for co in 0..g.c_out {
        let out_c = &mut out[co * plane..(co + 1) * plane];
        out_c.fill(bias.data()[co]);
        for ci in 0..g.c_in {
            for fh in 0..g.fh {
                let f_row = &f[((co * g.c_in + ci) * g.fh + fh) * g.fw..][..g.fw];
                for oh in 0..g.out_h {
                    let Some(ih) = g.in_row(oh, fh) else { continue };
                    let x_row = &x[(ci * g.h + ih) * g.w..][..g.w];
                    let o_row = &mut out_c[oh * g.out_w..(oh + 1) * g.out_w];
                    for (fw, &wt) in f_row.iter().enumerate() {
                        let (lo, hi) = g.out_cols(fw);
                        if spec.stride_w == 1 {
                            let start = g.in_col(lo, fw);
                            for (o, &xv) in o_row[lo..hi].iter_mut().zip(&x_row[start..]) {
                                *o += wt * xv;
                            }
                        } else {
                            for ow in lo..hi {
                                o_row[ow] += wt * x_row[g.in_col(ow, fw)];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![g.c_out, g.out_h, g.out_w], out)
}

/// Accumulates convolution gradients into caller-owned buffers.
///
/// `filter_grad` and `bias_grad` are added to, not overwritten. The input
/// gradient is skipped when `input_grad` is `None` (first layer of a net).
pub(crate) fn conv2d_backward_into(
    input: &Tensor,
    filters: &Tensor,
    upstream: &Tensor,
    spec: Conv2dSpec,
    mut input_grad: Option<&mut [f64]>,
    filter_grad: &mut [f64],
    bias_grad: &mut [f64],
) -> Result<()> {
    let g = Geometry::new(input.dims(), filters.dims(), spec)?;
    upstream.expect_dims(&[g.c_out, g.out_h, g.out_w], "conv2d upstream gradient")?;
    let x = input.data();
    let f = filters.data();
    let up = upstream.data();
    let plane = g.out_h * g.out_w;
    for co in 0..g.c_out {
        let up_c = &up[co * plane..(co + 1) * plane];
        bias_grad[co] += up_c.iter().sum::<f64>();
        for ci in 0..g.c_in {
            for fh in 0..g.fh {
                let base = ((co * g.c_in + ci) * g.fh + fh) * g.fw;
                for oh in 0..g.out_h {
                    let Some(ih) = g.in_row(oh, fh) else { continue };
                    let x_row = &x[(ci * g.h + ih) * g.w..][..g.w];
                    let u_row = &up_c[oh * g.out_w..(oh + 1) * g.out_w];
                    for fw in 0..g.fw {
                        let (lo, hi) = g.out_cols(fw);
                        let acc = if spec.stride_w == 1 {
                            let start = g.in_col(lo, fw);
                            dot_lanes(&u_row[lo..hi], &x_row[start..start + (hi - lo)])
                        } else {
                            (lo..hi).map(|ow| u_row[ow] * x_row[g.in_col(ow, fw)]).sum()
                        };
                        filter_grad[base + fw] += acc;
                        if let Some(ig) = input_grad.as_deref_mut() {
                            let wt = f[base + fw];
                            let ig_row = &mut ig[(ci * g.h + ih) * g.w..][..g.w];
                            for ow in lo..hi {
                                ig_row[g.in_col(ow, fw)] += wt * u_row[ow];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Gradients of a convolution for input, `filters` and `bias`.
pub fn conv2d_backward(
    input: &Tensor,
    filters: &Tensor,
    upstream: &Tensor,
    spec: Conv2dSpec,
) -> Result<LayerGrad> {
    let mut input_grad = Tensor::zeros(input.dims());
    let mut filter_grad = Tensor::zeros(filters.dims());
    let mut bias_grad = Tensor::zeros(&[filters.dims()[0]]);
    conv2d_backward_into(
        input,
        filters,
        upstream,
        spec,
        Some(input_grad.data_mut()),
        filter_grad.data_mut(),
        bias_grad.data_mut(),
    )?;
    let mut param_grads = BTreeMap::new();
    param_grads.insert("filters".to_string(), filter_grad);
    param_grads.insert("bias".to_string(), bias_grad);
    Ok(LayerGrad {
        input_grad,
        param_grads,
    })
}
