//! Modality transforms and the image–caption similarity.
//!
//! Regions map affinely, `y = W_m v + b_m`; words map through a rectified
//! affine layer, `x = max(0, W_d ŵ + b_d)`, where `ŵ` is the optionally
//! unit-normalized word vector. A caption scores against an image as
//! `S = Σ_t max(0, max_i y_iᵀ x_t)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{CaptionRecord, ImageRecord};
use crate::error::{Error, Result};
use crate::tensor::{dot, NamedTensors, Tensor};

pub const W_M: &str = "w_m";
pub const B_M: &str = "b_m";
pub const W_D: &str = "w_d";
pub const B_D: &str = "b_d";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlignInit {
    /// Zero-mean Gaussian weights with σ = 1/√fan_in, zero biases.
    #[default]
    Gaussian,
    /// All parameters zero (every score is then 0).
    Zeros,
}

/// `{W_m, b_m, W_d, b_d}` for an `h`-dimensional joint space.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignParams {
    h: usize,
    d_i: usize,
    d_w: usize,
    tensors: NamedTensors,
}

impl AlignParams {
    pub fn init(h: usize, d_i: usize, d_w: usize, init: AlignInit, seed: u64) -> Result<Self> {
        if h == 0 || d_i == 0 || d_w == 0 {
            return Err(Error::param(format!("alignment dims must be positive (h={h}, d_I={d_i}, d_W={d_w})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w_m, w_d) = match init {
            AlignInit::Gaussian => (
                Tensor::randn(&[h, d_i], 1.0 / (d_i as f64).sqrt(), &mut rng),
                Tensor::randn(&[h, d_w], 1.0 / (d_w as f64).sqrt(), &mut rng),
            ),
            AlignInit::Zeros => (Tensor::zeros(&[h, d_i]), Tensor::zeros(&[h, d_w])),
        };
        let mut tensors = NamedTensors::new();
        tensors.insert(W_M.into(), w_m);
        tensors.insert(B_M.into(), Tensor::zeros(&[h]));
        tensors.insert(W_D.into(), w_d);
        tensors.insert(B_D.into(), Tensor::zeros(&[h]));
        Ok(Self { h, d_i, d_w, tensors })
    }

    pub fn from_tensors(w_m: Tensor, b_m: Tensor, w_d: Tensor, b_d: Tensor) -> Result<Self> {
        let &[h, d_i] = w_m.dims() else {
            return Err(Error::shape(format!("W_m must be h×d_I, got {:?}", w_m.dims())));
        };
        let &[h2, d_w] = w_d.dims() else {
            return Err(Error::shape(format!("W_d must be h×d_W, got {:?}", w_d.dims())));
        };
        if h2 != h {
            return Err(Error::shape(format!("W_m has h={h} but W_d has h={h2}")));
        }
        b_m.expect_dims(&[h], "b_m")?;
        b_d.expect_dims(&[h], "b_d")?;
        let mut tensors = NamedTensors::new();
        tensors.insert(W_M.into(), w_m);
        tensors.insert(B_M.into(), b_m);
        tensors.insert(W_D.into(), w_d);
        tensors.insert(B_D.into(), b_d);
        Ok(Self { h, d_i, d_w, tensors })
    }

    pub fn from_named(mut named: NamedTensors) -> Result<Self> {
        let mut take = |k: &str| named.remove(k).ok_or_else(|| Error::Data(format!("missing alignment tensor `{k}`")));
        let (w_m, b_m, w_d, b_d) = (take(W_M)?, take(B_M)?, take(W_D)?, take(B_D)?);
        if let Some(extra) = named.keys().next() {
            return Err(Error::Data(format!("unexpected alignment tensor `{extra}`")));
        }
        Self::from_tensors(w_m, b_m, w_d, b_d)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn d_i(&self) -> usize {
        self.d_i
    }

    pub fn d_w(&self) -> usize {
        self.d_w
    }

    pub fn w_m(&self) -> &Tensor {
        &self.tensors[W_M]
    }

    pub fn b_m(&self) -> &Tensor {
        &self.tensors[B_M]
    }

    pub fn w_d(&self) -> &Tensor {
        &self.tensors[W_D]
    }

    pub fn b_d(&self) -> &Tensor {
        &self.tensors[B_D]
    }

    pub fn tensors(&self) -> &NamedTensors {
        &self.tensors
    }

    /// Mutable access for optimizers. Dims must not be changed.
    pub(crate) fn tensors_mut(&mut self) -> &mut NamedTensors {
        &mut self.tensors
    }

    pub fn into_named(self) -> NamedTensors {
        self.tensors
    }
}

/// `y = W_m v + b_m`.
pub fn embed_region(v: &[f64], params: &AlignParams) -> Result<Vec<f64>> {
    if v.len() != params.d_i {
        return Err(Error::shape(format!("region vector has {} dims, model expects d_I={}", v.len(), params.d_i)));
    }
    let w = params.w_m().data();
    let b = params.b_m().data();
    Ok((0..params.h)
        .map(|r| dot(&w[r * params.d_i..(r + 1) * params.d_i], v) + b[r])
        .collect())
}

/// Divides by the Euclidean norm; zero vectors are returned unchanged.
pub fn unit_normalize(w: &[f64]) -> Vec<f64> {
    let norm = dot(w, w).sqrt();
    if norm > 0.0 {
        w.iter().map(|x| x / norm).collect()
    } else {
        w.to_vec()
    }
}

/// Pre-activation `W_d ŵ + b_d` and the (possibly normalized) input `ŵ`.
pub(crate) fn word_preactivation(w: &[f64], params: &AlignParams, normalize: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    if w.len() != params.d_w {
        return Err(Error::shape(format!("word vector has {} dims, model expects d_W={}", w.len(), params.d_w)));
    }
    let input = if normalize { unit_normalize(w) } else { w.to_vec() };
    let wd = params.w_d().data();
    let b = params.b_d().data();
    let z = (0..params.h)
        .map(|r| dot(&wd[r * params.d_w..(r + 1) * params.d_w], &input) + b[r])
        .collect();
    Ok((z, input))
}

/// `x = max(0, W_d ŵ + b_d)`.
pub fn embed_word_vec(w: &[f64], params: &AlignParams, normalize: bool) -> Result<Vec<f64>> {
    let (z, _) = word_preactivation(w, params, normalize)?;
    Ok(z.into_iter().map(|v| v.max(0.0)).collect())
}

/// Region embeddings of one image, flattened `20 × h`.
pub fn embed_image(image: &ImageRecord, params: &AlignParams) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(image.n_regions() * params.h);
    for i in 0..image.n_regions() {
        out.extend(embed_region(image.region(i), params)?);
    }
    Ok(out)
}

/// Word embeddings of one caption, flattened `N_w × h`.
pub fn embed_caption(caption: &CaptionRecord, params: &AlignParams, normalize: bool) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(caption.n_words() * params.h);
    for j in 0..caption.n_words() {
        out.extend(embed_word_vec(caption.word(j), params, normalize)?);
    }
    Ok(out)
}

/// Best region for one embedded word: `(index, y_iᵀ x)`, lowest index on ties.
#[inline]
pub fn best_region(regions: &[f64], word: &[f64]) -> (usize, f64) {
    let h = word.len();
    let mut best = (0, dot(&regions[..h], word));
    for (i, y) in regions.chunks_exact(h).enumerate().skip(1) {
        let s = dot(y, word);
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

/// The similarity of embedded regions (`R × h`) against embedded words
/// (`N × h`). Every scoring path in the crate goes through this function.
pub fn score_embedded(regions: &[f64], words: &[f64], h: usize) -> f64 {
    let mut total = 0.0;
    for x in words.chunks_exact(h) {
        total += best_region(regions, x).1.max(0.0);
    }
    total
}

pub fn image_caption_similarity(
    image: &ImageRecord,
    caption: &CaptionRecord,
    params: &AlignParams,
    normalize: bool,
) -> Result<f64> {
    let y = embed_image(image, params)?;
    let x = embed_caption(caption, params, normalize)?;
    Ok(score_embedded(&y, &x, params.h))
}

/// Square `B × B` matrix of `S_kl`, row = image `k`, column = caption `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(size: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::shape(format!("similarity matrix of size {size} needs {} values, got {}", size * size, values.len())));
        }
        Ok(Self { size, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::shape("similarity matrix must be square"));
        }
        Self::new(size, rows.concat())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.size + l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn batch_similarity(
    images: &[&ImageRecord],
    captions: &[&CaptionRecord],
    params: &AlignParams,
    normalize: bool,
) -> Result<SimilarityMatrix> {
    if images.len() != captions.len() {
        return Err(Error::param(format!("{} images but {} captions in batch", images.len(), captions.len())));
    }
    let ys = images.iter().map(|im| embed_image(im, params)).collect::<Result<Vec<_>>>()?;
    let xs = captions.iter().map(|c| embed_caption(c, params, normalize)).collect::<Result<Vec<_>>>()?;
    let b = images.len();
    let mut values = Vec::with_capacity(b * b);
    for y in &ys {
        for x in &xs {
            values.push(score_embedded(y, x, params.h));
        }
    }
    SimilarityMatrix::new(b, values)
}
