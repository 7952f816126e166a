#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spokenvis::align::{AlignParams, CaptionRecord, ImageRecord};
use spokenvis::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_params(h: usize, d_i: usize, d_w: usize, seed: u64) -> AlignParams {
    let mut r = rng(seed);
    AlignParams::from_tensors(
        Tensor::randn(&[h, d_i], 0.7, &mut r),
        Tensor::randn(&[h], 0.3, &mut r),
        Tensor::randn(&[h, d_w], 0.7, &mut r),
        Tensor::randn(&[h], 0.3, &mut r),
    )
    .unwrap()
}

pub fn random_batch(b: usize, d_i: usize, d_w: usize, max_words: usize, seed: u64) -> (Vec<ImageRecord>, Vec<CaptionRecord>) {
    let mut r = rng(seed);
    let mut images = Vec::new();
    let mut captions = Vec::new();
    for k in 0..b {
        let id = format!("im{k}");
        images.push(ImageRecord::new(&id, Tensor::randn(&[20, d_i], 1.0, &mut r)).unwrap());
        let n = r.gen_range(1..=max_words);
        captions.push(CaptionRecord::new(format!("cap{k}"), &id, Tensor::randn(&[n, d_w], 1.0, &mut r)).unwrap());
    }
    (images, captions)
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    let d = t.dims()[t.rank() - 1];
    t.data().chunks(d).map(<[f64]>::to_vec).collect()
}

/// Straight-loop transcription of the model: affine regions, rectified
/// affine words, sum over words of the clipped best region score.
pub struct Oracle {
    w_m: Vec<Vec<f64>>,
    b_m: Vec<f64>,
    w_d: Vec<Vec<f64>>,
    b_d: Vec<f64>,
    normalize: bool,
}

impl Oracle {
    pub fn new(p: &AlignParams, normalize: bool) -> Self {
        Self {
            w_m: rows(p.w_m()),
            b_m: p.b_m().data().to_vec(),
            w_d: rows(p.w_d()),
            b_d: p.b_d().data().to_vec(),
            normalize,
        }
    }

    pub fn region(&self, v: &[f64]) -> Vec<f64> {
        let mut y = Vec::new();
        for r in 0..self.w_m.len() {
            let mut acc = 0.0;
            for j in 0..v.len() {
                acc += self.w_m[r][j] * v[j];
            }
            y.push(acc + self.b_m[r]);
        }
        y
    }

    pub fn word_pre(&self, w: &[f64]) -> Vec<f64> {
        let mut input = w.to_vec();
        if self.normalize {
            let mut ss = 0.0;
            for v in w {
                ss += v * v;
            }
            let norm = ss.sqrt();
            if norm > 0.0 {
                for v in input.iter_mut() {
                    *v /= norm;
                }
            }
        }
        let mut z = Vec::new();
        for r in 0..self.w_d.len() {
            let mut acc = 0.0;
            for j in 0..input.len() {
                acc += self.w_d[r][j] * input[j];
            }
            z.push(acc + self.b_d[r]);
        }
        z
    }

    pub fn word(&self, w: &[f64]) -> Vec<f64> {
        self.word_pre(w).into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect()
    }

    fn word_scores(&self, image: &ImageRecord, caption: &CaptionRecord) -> Vec<Vec<f64>> {
        let ys: Vec<Vec<f64>> = (0..20).map(|i| self.region(image.region(i))).collect();
        (0..caption.n_words())
            .map(|t| {
                let x = self.word(caption.word(t));
                ys.iter()
                    .map(|y| {
                        let mut acc = 0.0;
                        for r in 0..x.len() {
                            acc += y[r] * x[r];
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    pub fn similarity(&self, image: &ImageRecord, caption: &CaptionRecord) -> f64 {
        let mut total = 0.0;
        for scores in self.word_scores(image, caption) {
            let mut best = f64::NEG_INFINITY;
            for s in scores {
                if s > best {
                    best = s;
                }
            }
            total += if best > 0.0 { best } else { 0.0 };
        }
        total
    }

    pub fn matrix(&self, images: &[ImageRecord], captions: &[CaptionRecord]) -> Vec<Vec<f64>> {
        images
            .iter()
            .map(|im| captions.iter().map(|c| self.similarity(im, c)).collect())
            .collect()
    }

    /// Distance from the nearest nondifferentiable point: hinge arguments,
    /// word pre-activations, best-vs-runner-up region gaps, and clipped
    /// best scores.
    pub fn kink_gap(&self, images: &[ImageRecord], captions: &[CaptionRecord]) -> f64 {
        let mut gap = f64::INFINITY;
        for c in captions {
            for t in 0..c.n_words() {
                for z in self.word_pre(c.word(t)) {
                    gap = gap.min(z.abs());
                }
            }
        }
        for im in images {
            for c in captions {
                for mut scores in self.word_scores(im, c) {
                    scores.sort_by(|a, b| b.total_cmp(a));
                    if scores.iter().any(|&s| s != 0.0) {
                        gap = gap.min(scores[0] - scores[1]).min(scores[0].abs());
                    }
                }
            }
        }
        let s = self.matrix(images, captions);
        for k in 0..s.len() {
            for l in 0..s.len() {
                if l != k {
                    gap = gap.min((s[k][l] - s[k][k] + 1.0).abs()).min((s[l][k] - s[k][k] + 1.0).abs());
                }
            }
        }
        gap
    }
}

pub fn flatten(p: &AlignParams) -> Vec<f64> {
    p.tensors().values().flat_map(|t| t.data().iter().copied()).collect()
}

pub fn unflatten(like: &AlignParams, theta: &[f64]) -> AlignParams {
    let mut named = like.tensors().clone();
    let mut off = 0;
    for t in named.values_mut() {
        let n = t.len();
        t.data_mut().copy_from_slice(&theta[off..off + n]);
        off += n;
    }
    AlignParams::from_named(named).unwrap()
}

pub fn refs<T>(v: &[T]) -> Vec<&T> {
    v.iter().collect()
}

pub mod pipeline;
