//! Bidirectional max-margin ranking cost over a batch similarity matrix and
//! its gradients w.r.t. the alignment parameters.
//!
//! `C = Σ_k Σ_{l≠k} [max(0, S_kl − S_kk + 1) + max(0, S_lk − S_kk + 1)]`.
//! The `l = k` terms would add a constant 2 per image with zero gradient, so
//! they are left out and `C = 0` means every margin is met.

use super::model::{best_region, embed_image, score_embedded, word_preactivation, AlignParams, SimilarityMatrix, B_D, B_M, W_D, W_M};
use super::records::{CaptionRecord, ImageRecord};
use crate::error::{Error, Result};
use crate::tensor::{NamedTensors, Tensor};

pub const MARGIN: f64 = 1.0;

pub fn margin_cost(s: &SimilarityMatrix) -> f64 {
    let b = s.size();
    let mut cost = 0.0;
    for k in 0..b {
        let diag = s.get(k, k);
        for l in 0..b {
            if l == k {
                continue;
            }
            cost += (s.get(k, l) - diag + MARGIN).max(0.0);
            cost += (s.get(l, k) - diag + MARGIN).max(0.0);
        }
    }
    cost
}

/// `∂C/∂S`, row-major `B × B`. Active hinges are those strictly above zero.
pub fn margin_cost_grad(s: &SimilarityMatrix) -> Vec<f64> {
    let b = s.size();
    let mut g = vec![0.0; b * b];
    for k in 0..b {
        let diag = s.get(k, k);
        for l in 0..b {
            if l == k {
                continue;
            }
            if s.get(k, l) - diag + MARGIN > 0.0 {
                g[k * b + l] += 1.0;
                g[k * b + k] -= 1.0;
            }
            if s.get(l, k) - diag + MARGIN > 0.0 {
                g[l * b + k] += 1.0;
                g[k * b + k] -= 1.0;
            }
        }
    }
    g
}

struct EmbeddedCaption {
    /// `W_d ŵ + b_d` per word, `N × h`.
    pre: Vec<f64>,
    /// `ŵ` per word, `N × d_W`.
    inputs: Vec<f64>,
    /// `max(0, pre)`.
    out: Vec<f64>,
}

fn embed_caption_cached(caption: &CaptionRecord, params: &AlignParams, normalize: bool) -> Result<EmbeddedCaption> {
    let mut pre = Vec::with_capacity(caption.n_words() * params.h());
    let mut inputs = Vec::with_capacity(caption.n_words() * params.d_w());
    for j in 0..caption.n_words() {
        let (z, w) = word_preactivation(caption.word(j), params, normalize)?;
        pre.extend(z);
        inputs.extend(w);
    }
    let out = pre.iter().map(|v| v.max(0.0)).collect();
    Ok(EmbeddedCaption { pre, inputs, out })
}

/// Batch cost and its gradients, keyed like [`AlignParams::tensors`].
///
/// Subgradient conventions: a hinge or threshold exactly at zero is
/// inactive, the region max routes to the lowest-index maximizer, and ReLU
/// passes gradient only for strictly positive pre-activations.
pub fn cost_gradients(
    images: &[&ImageRecord],
    captions: &[&CaptionRecord],
    params: &AlignParams,
    normalize: bool,
) -> Result<(f64, NamedTensors)> {
    if images.len() != captions.len() {
        return Err(Error::param(format!("{} images but {} captions in batch", images.len(), captions.len())));
    }
    if images.is_empty() {
        return Err(Error::param("empty batch"));
    }
    let h = params.h();
    let b = images.len();
    let ys = images.iter().map(|im| embed_image(im, params)).collect::<Result<Vec<_>>>()?;
    let xs = captions
        .iter()
        .map(|c| embed_caption_cached(c, params, normalize))
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::with_capacity(b * b);
    for y in &ys {
        for x in &xs {
            values.push(score_embedded(y, &x.out, h));
        }
    }
    let s = SimilarityMatrix::new(b, values)?;
    let cost = margin_cost(&s);
    let ds = margin_cost_grad(&s);

    let mut dys: Vec<Vec<f64>> = ys.iter().map(|y| vec![0.0; y.len()]).collect();
    let mut dxs: Vec<Vec<f64>> = xs.iter().map(|x| vec![0.0; x.out.len()]).collect();
    for k in 0..b {
        for l in 0..b {
            let g = ds[k * b + l];
            if g == 0.0 {
                continue;
            }
            for (t, x) in xs[l].out.chunks_exact(h).enumerate() {
                let (i, score) = best_region(&ys[k], x);
                if score <= 0.0 {
                    continue;
                }
                let y = &ys[k][i * h..(i + 1) * h];
                for (d, &xv) in dys[k][i * h..(i + 1) * h].iter_mut().zip(x) {
                    *d += g * xv;
                }
                for (d, &yv) in dxs[l][t * h..(t + 1) * h].iter_mut().zip(y) {
                    *d += g * yv;
                }
            }
        }
    }

    let (d_i, d_w) = (params.d_i(), params.d_w());
    let mut gw_m = Tensor::zeros(&[h, d_i]);
    let mut gb_m = Tensor::zeros(&[h]);
    for (image, dy) in images.iter().zip(&dys) {
        for (i, dyi) in dy.chunks_exact(h).enumerate() {
            let v = image.region(i);
            for (r, &g) in dyi.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                gb_m.data_mut()[r] += g;
                for (acc, &vv) in gw_m.data_mut()[r * d_i..(r + 1) * d_i].iter_mut().zip(v) {
                    *acc += g * vv;
                }
            }
        }
    }
    let mut gw_d = Tensor::zeros(&[h, d_w]);
    let mut gb_d = Tensor::zeros(&[h]);
    for (x, dx) in xs.iter().zip(&dxs) {
        for (t, dxt) in dx.chunks_exact(h).enumerate() {
            let w = &x.inputs[t * d_w..(t + 1) * d_w];
            let z = &x.pre[t * h..(t + 1) * h];
            for r in 0..h {
                if z[r] <= 0.0 || dxt[r] == 0.0 {
                    continue;
                }
                let g = dxt[r];
                gb_d.data_mut()[r] += g;
                for (acc, &wv) in gw_d.data_mut()[r * d_w..(r + 1) * d_w].iter_mut().zip(w) {
                    *acc += g * wv;
                }
            }
        }
    }
    let mut grads = NamedTensors::new();
    grads.insert(W_M.into(), gw_m);
    grads.insert(B_M.into(), gb_m);
    grads.insert(W_D.into(), gw_d);
    grads.insert(B_D.into(), gb_d);
    Ok((cost, grads))
}
