//! Minibatch SGD with momentum over the max-margin cost.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cost::cost_gradients;
use super::model::{AlignInit, AlignParams};
use super::records::Dataset;
use crate::error::{Error, Result};
use crate::optim::{sgd_momentum_step, OptimizerState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub h: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_images: usize,
    pub epochs: usize,
    pub normalize_words: bool,
    pub init: AlignInit,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            h: 512,
            learning_rate: 1e-6,
            momentum: 0.9,
            batch_images: 40,
            epochs: 20,
            normalize_words: true,
            init: AlignInit::Gaussian,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(Error::config("align.h", "must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("align.learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("align.momentum", "must lie in [0, 1)"));
        }
        if self.batch_images == 0 {
            return Err(Error::config("align.batch_images", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean batch cost per epoch, measured before each step.
    pub epoch_costs: Vec<f64>,
    pub batches_per_epoch: usize,
}

/// Initializes from `cfg.seed` and trains.
pub fn fit(dataset: &Dataset, cfg: &FitConfig) -> Result<(AlignParams, FitReport)> {
    cfg.validate()?;
    let (d_i, d_w) = dataset.feature_dims()?;
    if dataset.images.is_empty() || dataset.captions.is_empty() {
        return Err(Error::Data("training set has no images or no captions".into()));
    }
    let params = AlignParams::init(cfg.h, d_i, d_w, cfg.init, cfg.seed)?;
    fit_from(params, dataset, cfg)
}

/// Trains `params` in place of a fresh initialization.
pub fn fit_from(mut params: AlignParams, dataset: &Dataset, cfg: &FitConfig) -> Result<(AlignParams, FitReport)> {
    cfg.validate()?;
    let by_image = dataset.captions_by_image()?;
    if let Some(i) = by_image.iter().position(Vec::is_empty) {
        return Err(Error::Data(format!("image `{}` has no captions", dataset.images[i].id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut opt = OptimizerState::new(cfg.learning_rate, cfg.momentum)?;
    let mut order: Vec<usize> = (0..dataset.images.len()).collect();
    let batches_per_epoch = order.len().div_ceil(cfg.batch_images);
    let mut epoch_costs = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_images) {
            let images: Vec<_> = chunk.iter().map(|&i| &dataset.images[i]).collect();
            let captions: Vec<_> = chunk
                .iter()
                .map(|&i| {
                    let choices = &by_image[i];
                    &dataset.captions[choices[rng.gen_range(0..choices.len())]]
                })
                .collect();
            let (cost, grads) = cost_gradients(&images, &captions, &params, cfg.normalize_words)?;
            if !cost.is_finite() {
                return Err(Error::Internal(format!("non-finite batch cost {cost}")));
            }
            total += cost;
            sgd_momentum_step(params.tensors_mut(), &grads, &mut opt)?;
        }
        epoch_costs.push(total / batches_per_epoch as f64);
    }
    Ok((params, FitReport { epoch_costs, batches_per_epoch }))
}
