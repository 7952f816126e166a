use crate::error::Result;
use crate::tensor::Tensor;

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

/// Passes `upstream` where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    upstream.expect_dims(input.dims(), "relu upstream gradient")?;
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.dims().to_vec(), data)
}

/// In-place variant used by the classifier: zeroes `grad` where `activation`
/// (the ReLU output) is not positive.
pub(crate) fn relu_mask_inplace(activation: &[f64], grad: &mut [f64]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check_masked;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clamps_negatives() {
        let out = relu(&Tensor::from_vec(vec![-1.0, 0.0, 2.0]));
        assert_eq!(out.data(), &[0.0, 0.0, 2.0]);
        let pos = Tensor::from_vec(vec![0.5, 3.0, 0.0]);
        assert_eq!(relu(&pos), pos);
    }

    #[test]
    fn subgradient_at_zero_is_zero() {
        let g = relu_backward(&Tensor::from_vec(vec![0.0, 1.0]), &Tensor::from_vec(vec![5.0, 5.0])).unwrap();
        assert_eq!(g.data(), &[0.0, 5.0]);
    }

    #[test]
    fn backward_matches_finite_differences_away_from_kink() {
        let eps = 1e-5;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Tensor::randn(&[3, 4], 1.0, &mut rng);
            let r = Tensor::randn(&[3, 4], 1.0, &mut rng);
            let g = relu_backward(&x, &r).unwrap();
            let f = |v: &[f64]| {
                v.iter().zip(r.data()).map(|(&a, &b)| a.max(0.0) * b).sum::<f64>()
            };
            let check = grad_check_masked(f, x.data(), g.data(), eps, |i| x.data()[i].abs() > 10.0 * eps);
            assert!(check.max_rel_error < 1e-5, "seed {seed}: {check:?}");
        }
    }
}
