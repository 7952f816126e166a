//! Parameter bundles: `header.json` plus `tensors/<name>.mmtf`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::tensor_file::{read_tensor, write_tensor, DType};
use crate::align::{AlignParams, FitConfig};
use crate::wordcnn::{PretrainConfig, WordCnnArch, WordCnnParams};
use crate::error::{Error, Result};
use crate::tensor::NamedTensors;

#[derive(Serialize, Deserialize)]
struct Envelope<H> {
    kind: String,
    tensors: Vec<String>,
    #[serde(flatten)]
    meta: H,
}

pub fn write_bundle<H: Serialize>(dir: impl AsRef<Path>, kind: &str, meta: &H, tensors: &NamedTensors) -> Result<()> {
    let dir = dir.as_ref();
    for (name, t) in tensors {
        write_tensor(dir.join("tensors").join(format!("{name}.mmtf")), t, DType::F64)?;
    }
    let env = Envelope { kind: kind.to_string(), tensors: tensors.keys().cloned().collect(), meta };
    let mut json = serde_json::to_string_pretty(&env).map_err(|e| Error::json("bundle header", e))?;
    json.push('\n');
    let path = dir.join("header.json");
    fs::write(&path, json).map_err(|e| Error::io(path, e))
}

pub fn read_bundle<H: DeserializeOwned>(dir: impl AsRef<Path>, kind: &str) -> Result<(H, NamedTensors)> {
    let dir = dir.as_ref();
    let path = dir.join("header.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let env: Envelope<H> = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    if env.kind != kind {
        return Err(Error::Data(format!("{}: bundle kind is `{}`, expected `{kind}`", path.display(), env.kind)));
    }
    let mut tensors = NamedTensors::new();
    for name in env.tensors {
        let t = read_tensor(dir.join("tensors").join(format!("{name}.mmtf")))?;
        tensors.insert(name, t);
    }
    Ok((env.meta, tensors))
}

pub const ALIGN_BUNDLE: &str = "align";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignHeader {
    pub h: usize,
    #[serde(rename = "d_I")]
    pub d_i: usize,
    #[serde(rename = "d_W")]
    pub d_w: usize,
    pub seed: u64,
    pub config: FitConfig,
}

pub fn write_align_params(dir: impl AsRef<Path>, params: &AlignParams, config: &FitConfig) -> Result<()> {
    let header = AlignHeader { h: params.h(), d_i: params.d_i(), d_w: params.d_w(), seed: config.seed, config: config.clone() };
    write_bundle(dir, ALIGN_BUNDLE, &header, params.tensors())
}

pub fn read_align_params(dir: impl AsRef<Path>) -> Result<(AlignParams, AlignHeader)> {
    let (header, tensors): (AlignHeader, _) = read_bundle(dir.as_ref(), ALIGN_BUNDLE)?;
    let params = AlignParams::from_named(tensors)?;
    if (params.h(), params.d_i(), params.d_w()) != (header.h, header.d_i, header.d_w) {
        return Err(Error::Data(format!(
            "{}: header dims (h={}, d_I={}, d_W={}) disagree with tensors",
            dir.as_ref().display(),
            header.h,
            header.d_i,
            header.d_w
        )));
    }
    Ok((params, header))
}

pub const WORD_CNN_BUNDLE: &str = "word_cnn";
const MEAN_TENSOR: &str = "mean";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordCnnHeader {
    pub arch: WordCnnArch,
    pub vocab_size: usize,
    /// Word label per class index, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vocab: Vec<String>,
    pub seed: u64,
    pub config: PretrainConfig,
}

pub fn write_word_cnn(dir: impl AsRef<Path>, params: &WordCnnParams, vocab: &[String], config: &PretrainConfig) -> Result<()> {
    if !vocab.is_empty() && vocab.len() != params.arch().vocab_size {
        return Err(Error::Data(format!("{} vocabulary entries for {} classes", vocab.len(), params.arch().vocab_size)));
    }
    let header = WordCnnHeader {
        arch: params.arch().clone(),
        vocab_size: params.arch().vocab_size,
        vocab: vocab.to_vec(),
        seed: config.seed,
        config: config.clone(),
    };
    let mut tensors = params.tensors().clone();
    tensors.insert(MEAN_TENSOR.into(), params.mean().clone());
    write_bundle(dir, WORD_CNN_BUNDLE, &header, &tensors)
}

pub fn read_word_cnn(dir: impl AsRef<Path>) -> Result<(WordCnnParams, WordCnnHeader)> {
    let (header, mut tensors): (WordCnnHeader, _) = read_bundle(dir.as_ref(), WORD_CNN_BUNDLE)?;
    if header.vocab_size != header.arch.vocab_size || (!header.vocab.is_empty() && header.vocab.len() != header.vocab_size) {
        return Err(Error::Data(format!("{}: inconsistent vocabulary size in header", dir.as_ref().display())));
    }
    let mean = tensors
        .remove(MEAN_TENSOR)
        .ok_or_else(|| Error::Data(format!("{}: missing `{MEAN_TENSOR}` tensor", dir.as_ref().display())))?;
    let params = WordCnnParams::from_parts(header.arch.clone(), mean, tensors)?;
    Ok((params, header))
}
