//! Run configuration: one file mirroring every module's config, with
//! dotted-path overrides. The resolved value is what each run records.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::align::FitConfig;
use crate::audio::FrontendConfig;
use crate::error::{Error, Result};
use crate::synth::{SynthConfig, ToneConfig};
use crate::wordcnn::{PretrainConfig, WordCnnArch};

/// Classifier sizes that may vary plus the pretraining schedule. The input
/// grid comes from the frontend; the vocabulary from the training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub channels: usize,
    pub fc1: usize,
    pub fc2: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub lr_decay: f64,
    pub patience: usize,
    pub target_train_top1: Option<f64>,
    /// Share of labeled examples held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        let arch = WordCnnArch::standard(1);
        let pre = PretrainConfig::default();
        Self {
            channels: arch.channels,
            fc1: arch.fc1,
            fc2: arch.fc2,
            dropout: arch.dropout,
            epochs: pre.epochs,
            batch_size: pre.batch_size,
            learning_rate: pre.learning_rate,
            momentum: pre.momentum,
            lr_decay: pre.lr_decay,
            patience: pre.patience,
            target_train_top1: pre.target_train_top1,
            validation_fraction: 0.1,
            seed: pre.seed,
        }
    }
}

impl CnnConfig {
    pub fn arch(&self, frontend: &FrontendConfig, vocab_size: usize) -> WordCnnArch {
        WordCnnArch {
            n_bands: frontend.n_mels,
            n_frames: frontend.target_frames,
            channels: self.channels,
            fc1: self.fc1,
            fc2: self.fc2,
            dropout: self.dropout,
            ..WordCnnArch::standard(vocab_size)
        }
    }

    pub fn pretrain(&self) -> PretrainConfig {
        PretrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            lr_decay: self.lr_decay,
            patience: self.patience,
            target_train_top1: self.target_train_top1,
            seed: self.seed,
        }
    }

    pub fn validate(&self, frontend: &FrontendConfig) -> Result<()> {
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("cnn.validation_fraction", "must lie in [0, 1)"));
        }
        self.pretrain().validate()?;
        self.arch(frontend, 1).validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k: 10 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub frontend: FrontendConfig,
    pub cnn: CnnConfig,
    pub align: FitConfig,
    pub eval: EvalConfig,
    pub synth: SynthConfig,
    pub words: ToneConfig,
}

fn json_err(context: &str) -> impl Fn(serde_json::Error) -> Error + '_ {
    move |e| Error::config(context, e.to_string())
}

impl RunConfig {
    /// Parses TOML, or JSON when the file ends in `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ctx = path.display().to_string();
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(json_err(&ctx))
        } else {
            toml::from_str(&text).map_err(|e| Error::config(ctx, e.message().to_string()))
        }
    }

    /// Applies `key.path=value`. The value is read as JSON when it parses,
    /// otherwise as a string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must look like key.path=value"))?;
        let key = key.trim();
        let value: Value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        let mut tree = serde_json::to_value(&*self).map_err(json_err(key))?;
        let mut node = &mut tree;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| Error::config(key, "not a config section"))?;
            if !obj.contains_key(*part) {
                return Err(Error::config(key, "unknown key"));
            }
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj.get_mut(*part).expect("checked above");
        }
        *self = serde_json::from_value(tree).map_err(json_err(key))?;
        Ok(())
    }

    /// One seed for every module.
    pub fn set_seed(&mut self, seed: u64) {
        self.cnn.seed = seed;
        self.align.seed = seed;
        self.synth.seed = seed;
        self.words.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend.validate()?;
        self.cnn.validate(&self.frontend)?;
        self.align.validate()?;
        if self.eval.k == 0 {
            return Err(Error::config("eval.k", "must be positive"));
        }
        self.synth.validate()?;
        self.words.validate()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut json = serde_json::to_string_pretty(self).map_err(|e| Error::json("run config", e))?;
        json.push('\n');
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_json_values() {
        let mut cfg = RunConfig::default();
        cfg.set("align.h=16").unwrap();
        cfg.set("align.learning_rate=4e-4").unwrap();
        cfg.set("cnn.target_train_top1=0.99").unwrap();
        assert_eq!(cfg.align.h, 16);
        assert_eq!(cfg.align.learning_rate, 4e-4);
        assert_eq!(cfg.cnn.target_train_top1, Some(0.99));
    }

    #[test]
    fn bad_overrides_name_the_key() {
        let mut cfg = RunConfig::default();
        for bad in ["align.nope=1", "align.h=-3", "align", "eval.k.x=1"] {
            let err = cfg.set(bad).unwrap_err().to_string();
            let key = bad.split('=').next().unwrap();
            assert!(err.contains(key), "{bad}: {err}");
        }
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        std::fs::write(&toml_path, "[align]\nh = 16\nepochs = 3\n\n[eval]\nk = 5\n").unwrap();
        let a = RunConfig::load(&toml_path).unwrap();
        let json_path = dir.path().join("run.json");
        a.write_json(&json_path).unwrap();
        assert_eq!(RunConfig::load(&json_path).unwrap(), a);
        assert_eq!((a.align.h, a.align.epochs, a.eval.k), (16, 3, 5));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "[align]\nhh = 16\n").unwrap();
        assert!(matches!(RunConfig::load(&p), Err(Error::Config { .. })));
    }

    #[test]
    fn validation_reports_dotted_keys() {
        let mut cfg = RunConfig::default();
        cfg.eval.k = 0;
        assert!(cfg.validate().unwrap_err().to_string().contains("eval.k"));
        let mut cfg = RunConfig::default();
        cfg.cnn.validation_fraction = 1.5;
        assert!(cfg.validate().unwrap_err().to_string().contains("cnn.validation_fraction"));
    }
}
