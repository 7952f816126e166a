//! Supervised pretraining of the word classifier.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::WordCnnArch;
use super::net::{estimate_mean_spectrogram, forward_batch, label_rank, loss_and_grads, WordCnnParams};
use crate::audio::Spectrogram;
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::optim::{sgd_momentum_step, OptimizerState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplier applied when the monitored loss stops improving.
    pub lr_decay: f64,
    /// Epochs without improvement before decaying.
    pub patience: usize,
    /// Stop once train top-1 reaches this fraction.
    pub target_train_top1: Option<f64>,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-2,
            momentum: 0.9,
            lr_decay: 0.1,
            patience: 10,
            target_train_top1: None,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("cnn.{key}"), msg));
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", "must lie in [0, 1)");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay", "must lie in (0, 1]");
        }
        if self.patience == 0 {
            return bad("patience", "must be positive");
        }
        if let Some(t) = self.target_train_top1 {
            if !(0.0..=1.0).contains(&t) {
                return bad("target_train_top1", "must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub top1: f64,
    pub top5: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean minibatch loss with dropout active.
    pub batch_loss: f64,
    pub train: TopK,
    pub validation: Option<TopK>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub epochs: Vec<EpochStats>,
}

pub type Labeled = (Spectrogram, usize);

const EVAL_CHUNK: usize = 64;

/// Eval-mode top-1, top-5 and mean cross-entropy.
pub fn accuracy(examples: &[Labeled], params: &WordCnnParams) -> Result<TopK> {
    if examples.is_empty() {
        return Err(Error::Input("accuracy of an empty example set".into()));
    }
    let (mut top1, mut top5, mut loss) = (0usize, 0usize, 0.0);
    for chunk in examples.chunks(EVAL_CHUNK) {
        let specs: Vec<&Spectrogram> = chunk.iter().map(|e| &e.0).collect();
        for (out, (_, label)) in forward_batch(&specs, params, Mode::Eval, 0)?.iter().zip(chunk) {
            let rank = label_rank(&out.logits, *label);
            top1 += usize::from(rank <= 1);
            top5 += usize::from(rank <= 5);
            let m = out.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + out.logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
            loss += lse - out.logits[*label];
        }
    }
    let n = examples.len() as f64;
    Ok(TopK { top1: top1 as f64 / n, top5: top5 as f64 / n, loss: loss / n })
}

fn check_labels(examples: &[Labeled], vocab: usize, what: &str) -> Result<()> {
    match examples.iter().find(|e| e.1 >= vocab) {
        Some(e) => Err(Error::Data(format!("{what} label {} outside vocabulary of {vocab}", e.1))),
        None => Ok(()),
    }
}

/// Fresh initialization, mean estimated on `train`, then minibatch SGD.
pub fn pretrain(
    train: &[Labeled],
    validation: Option<&[Labeled]>,
    arch: WordCnnArch,
    cfg: &PretrainConfig,
) -> Result<(WordCnnParams, PretrainReport)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Input("no training examples".into()));
    }
    check_labels(train, arch.vocab_size, "training")?;
    if let Some(v) = validation {
        check_labels(v, arch.vocab_size, "validation")?;
    }
    let mut params = WordCnnParams::init(arch, cfg.seed)?;
    let specs: Vec<&Spectrogram> = train.iter().map(|e| &e.0).collect();
    params.set_mean(estimate_mean_spectrogram(&specs)?)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut opt = OptimizerState::new(cfg.learning_rate, cfg.momentum)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = PretrainReport::default();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut batch_loss = 0.0;
        let mut n_batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&Spectrogram, usize)> = chunk.iter().map(|&i| (&train[i].0, train[i].1)).collect();
            let (loss, grads) = loss_and_grads(&batch, &params, Mode::Train, rng.gen())?;
            if !loss.is_finite() {
                return Err(Error::Internal(format!("non-finite classifier loss at epoch {epoch}")));
            }
            sgd_momentum_step(params.tensors_mut(), &grads, &mut opt)?;
            batch_loss += loss;
            n_batches += 1;
        }
        let train_acc = accuracy(train, &params)?;
        let val_acc = validation.filter(|v| !v.is_empty()).map(|v| accuracy(v, &params)).transpose()?;
        report.epochs.push(EpochStats {
            epoch,
            learning_rate: opt.learning_rate,
            batch_loss: batch_loss / n_batches as f64,
            train: train_acc,
            validation: val_acc,
        });
        let monitored = val_acc.map_or(train_acc.loss, |v| v.loss);
        if monitored < best {
            best = monitored;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                opt.learning_rate *= cfg.lr_decay;
                stale = 0;
            }
        }
        if cfg.target_train_top1.is_some_and(|t| train_acc.top1 >= t) {
            break;
        }
    }
    Ok((params, report))
}
