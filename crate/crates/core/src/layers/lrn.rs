//! Across-channel local response normalization:
//! `b_c = a_c / (k + (α/n) Σ_{c' ∈ window(c)} a_{c'}²)^β`, window clipped at
//! the channel boundaries.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrnSpec {
    pub size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
}

impl Default for LrnSpec {
    fn default() -> Self {
        Self {
            size: 5,
            alpha: 1e-4,
            beta: 0.75,
            k: 1.0,
        }
    }
}

impl LrnSpec {
    fn validate(&self) -> Result<()> {
        if self.size == 0 || self.size.is_multiple_of(2) {
            return Err(Error::param(format!("LRN size must be odd, got {}", self.size)));
        }
        if self.k <= 0.0 || self.alpha < 0.0 {
            return Err(Error::param("LRN requires k > 0 and alpha >= 0"));
        }
        Ok(())
    }
}

fn chw(input: &Tensor) -> Result<(usize, usize)> {
    match input.dims() {
        &[c, h, w] => Ok((c, h * w)),
        d => Err(Error::shape(format!("LRN input must be C×H×W, got {d:?}"))),
    }
}

/// The per-cell denominator base `k + (α/n) Σ a²` (before the power).
fn scales(input: &Tensor, spec: LrnSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let (c, plane) = chw(input)?;
    let half = spec.size / 2;
    let a = input.data();
    let coeff = spec.alpha / spec.size as f64;
    let mut scale = vec![0.0; a.len()];
    for ch in 0..c {
        let lo = ch.saturating_sub(half);
        let hi = (ch + half).min(c - 1);
        for p in 0..plane {
            let mut s = 0.0;
            for other in lo..=hi {
                let v = a[other * plane + p];
                s += v * v;
            }
            scale[ch * plane + p] = spec.k + coeff * s;
        }
    }
    Ok(scale)
}

pub fn lrn(input: &Tensor, spec: LrnSpec) -> Result<Tensor> {
    let scale = scales(input, spec)?;
    let data = input
        .data()
        .iter()
        .zip(&scale)
        .map(|(&a, &d)| a * d.powf(-spec.beta))
        .collect();
    Tensor::new(input.dims().to_vec(), data)
}

/// `∂L/∂a_j = g_j D_j^{-β} − (2αβ/n) a_j Σ_{c ∋ j} g_c a_c D_c^{-β-1}`.
pub fn lrn_backward(input: &Tensor, upstream: &Tensor, spec: LrnSpec) -> Result<Tensor> {
    upstream.expect_dims(input.dims(), "LRN upstream gradient")?;
    let scale = scales(input, spec)?;
    let (c, plane) = chw(input)?;
    let half = spec.size / 2;
    let a = input.data();
    let g = upstream.data();
    // t_c = g_c a_c D_c^{-β-1}
    let t: Vec<f64> = (0..a.len())
        .map(|i| g[i] * a[i] * scale[i].powf(-spec.beta - 1.0))
        .collect();
    let coeff = 2.0 * spec.alpha * spec.beta / spec.size as f64;
    let mut out = vec![0.0; a.len()];
    for ch in 0..c {
        let lo = ch.saturating_sub(half);
        let hi = (ch + half).min(c - 1);
        for p in 0..plane {
            let i = ch * plane + p;
            let mut cross = 0.0;
            for other in lo..=hi {
                cross += t[other * plane + p];
            }
            out[i] = g[i] * scale[i].powf(-spec.beta) - coeff * a[i] * cross;
        }
    }
    Tensor::new(input.dims().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{max_relative_error, numeric_gradient};
    use crate::tensor::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_maps_to_zero() {
        let out = lrn(&Tensor::zeros(&[6, 2, 3]), LrnSpec::default()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_channel_unit_value() {
        let out = lrn(&Tensor::filled(&[1, 1, 1], 1.0), LrnSpec::default()).unwrap();
        // 1 / (1 + 1e-4/5 * 1)^0.75
        let expected = 1.0 / 1.000_02_f64.powf(0.75);
        assert!((out.data()[0] - expected).abs() < 1e-15);
        assert!((expected - 0.999_985_000_262_495).abs() < 1e-12);
    }

    #[test]
    fn window_is_clipped_at_channel_edges() {
        let spec = LrnSpec { size: 3, alpha: 3.0, beta: 1.0, k: 1.0 };
        let x = Tensor::new(vec![3, 1, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let out = lrn(&x, spec).unwrap();
        // channel 0 sees {0,1}: 1 + (3/3)(1+4) = 6
        assert!((out.data()[0] - 1.0 / 6.0).abs() < 1e-15);
        // channel 1 sees all: 1 + 14 = 15
        assert!((out.data()[1] - 2.0 / 15.0).abs() < 1e-15);
        // channel 2 sees {1,2}: 1 + 13 = 14
        assert!((out.data()[2] - 3.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn even_size_rejected() {
        let spec = LrnSpec { size: 4, ..LrnSpec::default() };
        assert!(matches!(lrn(&Tensor::zeros(&[2, 1, 1]), spec), Err(Error::Param(_))));
    }

    #[test]
    fn preserves_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::randn(&[7, 3, 2], 30.0, &mut rng);
        let out = lrn(&x, LrnSpec::default()).unwrap();
        for (a, b) in x.data().iter().zip(out.data()) {
            assert_eq!(a.signum(), b.signum());
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Larger alpha exercises the cross-channel term; the default is
            // checked too.
            let spec = if seed % 2 == 0 {
                LrnSpec::default()
            } else {
                LrnSpec { size: 3, alpha: 0.5, beta: 0.75, k: 2.0 }
            };
            let c = rng.gen_range(1..8);
            let x = Tensor::randn(&[c, 2, 3], 2.0, &mut rng);
            let r = Tensor::randn(&[c, 2, 3], 1.0, &mut rng);
            let g = lrn_backward(&x, &r, spec).unwrap();
            let num = numeric_gradient(x.data(), 1e-5, |v| {
                dot(lrn(&Tensor::new(x.dims().to_vec(), v.to_vec()).unwrap(), spec).unwrap().data(), r.data())
            });
            let err = max_relative_error(g.data(), &num);
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }
}
