//! Parameters, forward pass and minibatch gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::WordCnnArch;
use crate::audio::Spectrogram;
use crate::error::{Error, Result};
use crate::layers::{
    conv2d, conv2d_backward_into, dropout_mask, lrn, lrn_backward, maxpool, maxpool_backward, relu_mask_inplace, softmax_xent, Mode,
};
use crate::tensor::{axpy_slice, dot_lanes, NamedTensors, Tensor};

pub const CONV_FILTERS: &str = "conv.filters";
pub const CONV_BIAS: &str = "conv.bias";
pub const FC1_WEIGHT: &str = "fc1.weight";
pub const FC1_BIAS: &str = "fc1.bias";
pub const FC2_WEIGHT: &str = "fc2.weight";
pub const FC2_BIAS: &str = "fc2.bias";
pub const OUT_WEIGHT: &str = "out.weight";
pub const OUT_BIAS: &str = "out.bias";

/// Trainable tensors plus the fixed per-cell input mean.
#[derive(Clone, Debug, PartialEq)]
pub struct WordCnnParams {
    arch: WordCnnArch,
    mean: Tensor,
    tensors: NamedTensors,
}

impl WordCnnParams {
    /// Gaussian weights with variance `1/fan_in`, zero biases, zero mean grid.
    pub fn init(arch: WordCnnArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d1 = arch.fc1_input()?;
        let conv_fan_in = arch.n_bands * arch.filter_w;
        let mut tensors = NamedTensors::new();
        let mut gauss = |name: &str, dims: &[usize], fan_in: usize| {
            tensors.insert(name.to_string(), Tensor::randn(dims, 1.0 / (fan_in as f64).sqrt(), &mut rng));
        };
        gauss(CONV_FILTERS, &[arch.channels, 1, arch.n_bands, arch.filter_w], conv_fan_in);
        gauss(FC1_WEIGHT, &[arch.fc1, d1], d1);
        gauss(FC2_WEIGHT, &[arch.fc2, arch.fc1], arch.fc1);
        gauss(OUT_WEIGHT, &[arch.vocab_size, arch.fc2], arch.fc2);
        tensors.insert(CONV_BIAS.into(), Tensor::zeros(&[arch.channels]));
        tensors.insert(FC1_BIAS.into(), Tensor::zeros(&[arch.fc1]));
        tensors.insert(FC2_BIAS.into(), Tensor::zeros(&[arch.fc2]));
        tensors.insert(OUT_BIAS.into(), Tensor::zeros(&[arch.vocab_size]));
        let mean = Tensor::zeros(&[arch.n_bands, arch.n_frames]);
        Ok(Self { arch, mean, tensors })
    }

    /// Rebuilds from stored tensors, checking every shape against `arch`.
    pub fn from_parts(arch: WordCnnArch, mean: Tensor, tensors: NamedTensors) -> Result<Self> {
        let reference = Self::init(arch.clone(), 0)?;
        mean.expect_dims(reference.mean.dims(), "mean spectrogram")?;
        if tensors.len() != reference.tensors.len() {
            return Err(Error::Data(format!(
                "word CNN needs tensors {:?}, got {:?}",
                reference.tensors.keys().collect::<Vec<_>>(),
                tensors.keys().collect::<Vec<_>>()
            )));
        }
        for (name, t) in &reference.tensors {
            let got = tensors.get(name).ok_or_else(|| Error::Data(format!("missing word CNN tensor `{name}`")))?;
            got.expect_dims(t.dims(), name)?;
        }
        Ok(Self { arch, mean, tensors })
    }

    pub fn arch(&self) -> &WordCnnArch {
        &self.arch
    }

    pub fn mean(&self) -> &Tensor {
        &self.mean
    }

    pub fn set_mean(&mut self, mean: Tensor) -> Result<()> {
        mean.expect_dims(self.mean.dims(), "mean spectrogram")?;
        self.mean = mean;
        Ok(())
    }

    pub fn tensors(&self) -> &NamedTensors {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut NamedTensors {
        &mut self.tensors
    }

    fn t(&self, name: &str) -> &Tensor {
        &self.tensors[name]
    }

    pub fn zero_grads(&self) -> NamedTensors {
        self.tensors.iter().map(|(k, t)| (k.clone(), Tensor::zeros(t.dims()))).collect()
    }
}

/// Cellwise mean of a training set of fitted spectrograms.
pub fn estimate_mean_spectrogram(specs: &[&Spectrogram]) -> Result<Tensor> {
    let first = specs.first().ok_or_else(|| Error::Input("mean of an empty spectrogram set".into()))?;
    let mut sum = Tensor::zeros(first.as_tensor().dims());
    for s in specs {
        sum.axpy(1.0, s.as_tensor())?;
    }
    sum.scale(1.0 / specs.len() as f64);
    Ok(sum)
}

fn centered_input(spec: &Spectrogram, params: &WordCnnParams) -> Result<Tensor> {
    let a = params.arch();
    if (spec.n_bands(), spec.n_frames()) != (a.n_bands, a.n_frames) {
        return Err(Error::shape(format!(
            "spectrogram is {}×{}, the network expects a fitted {}×{} grid",
            spec.n_bands(),
            spec.n_frames(),
            a.n_bands,
            a.n_frames
        )));
    }
    let data = spec.as_tensor().data().iter().zip(params.mean.data()).map(|(x, m)| x - m).collect();
    Tensor::new(vec![1, a.n_bands, a.n_frames], data)
}

struct ConvCache {
    input: Tensor,
    /// Post-ReLU conv activations (LRN input).
    relu: Tensor,
    argmax: Vec<usize>,
    lrn_dims: Vec<usize>,
}

/// mean-subtract → conv → ReLU → LRN → maxpool, flattened.
fn conv_stage(spec: &Spectrogram, params: &WordCnnParams) -> Result<(ConvCache, Vec<f64>)> {
    let a = params.arch();
    let input = centered_input(spec, params)?;
    let relu = conv2d(&input, params.t(CONV_FILTERS), params.t(CONV_BIAS), a.conv_spec())?.map(|v| v.max(0.0));
    let normed = lrn(&relu, a.lrn_spec())?;
    let (pooled, argmax) = maxpool(&normed, a.pool_spec())?;
    let lrn_dims = normed.dims().to_vec();
    Ok((ConvCache { input, relu, argmax, lrn_dims }, pooled.into_data()))
}

fn conv_stage_backward(
    cache: &ConvCache,
    d_pooled: &[f64],
    params: &WordCnnParams,
    grads: &mut NamedTensors,
) -> Result<()> {
    let a = params.arch();
    let up = Tensor::new(vec![d_pooled.len()], d_pooled.to_vec())?;
    let d_lrn = maxpool_backward(&cache.lrn_dims, &cache.argmax, &up)?;
    let mut d_relu = lrn_backward(&cache.relu, &d_lrn, a.lrn_spec())?;
    relu_mask_inplace(cache.relu.data(), d_relu.data_mut());
    let mut gf = std::mem::replace(grads.get_mut(CONV_FILTERS).unwrap(), Tensor::zeros(&[1]));
    let mut gb = std::mem::replace(grads.get_mut(CONV_BIAS).unwrap(), Tensor::zeros(&[1]));
    let res = conv2d_backward_into(
        &cache.input,
        params.t(CONV_FILTERS),
        &d_relu,
        a.conv_spec(),
        None,
        gf.data_mut(),
        gb.data_mut(),
    );
    grads.insert(CONV_FILTERS.into(), gf);
    grads.insert(CONV_BIAS.into(), gb);
    res
}

/// `out[b][r] = W[r]·x[b] + bias[r]` for a row-major batch.
fn dense_forward(x: &[f64], batch: usize, w: &Tensor, bias: &Tensor) -> Vec<f64> {
    let (k, d) = (w.dims()[0], w.dims()[1]);
    let mut out = vec![0.0; batch * k];
    for r in 0..k {
        let row = &w.data()[r * d..(r + 1) * d];
        for b in 0..batch {
            out[b * k + r] = dot_lanes(row, &x[b * d..(b + 1) * d]) + bias.data()[r];
        }
    }
    out
}

/// Accumulates weight and bias gradients; returns the input gradient when asked.
fn dense_backward(x: &[f64], batch: usize, w: &Tensor, g: &[f64], gw: &mut Tensor, gb: &mut Tensor, want_input: bool) -> Vec<f64> {
    let (k, d) = (w.dims()[0], w.dims()[1]);
    let mut gx = if want_input { vec![0.0; batch * d] } else { Vec::new() };
    for r in 0..k {
        let row = &w.data()[r * d..(r + 1) * d];
        let gw_row = &mut gw.data_mut()[r * d..(r + 1) * d];
        for b in 0..batch {
            let gv = g[b * k + r];
            if gv == 0.0 {
                continue;
            }
            gb.data_mut()[r] += gv;
            axpy_slice(gw_row, gv, &x[b * d..(b + 1) * d]);
            if want_input {
                axpy_slice(&mut gx[b * d..(b + 1) * d], gv, row);
            }
        }
    }
    gx
}

/// ReLU then inverted dropout, in place. Returns the combined multiplier
/// per element (0 where the unit was off or dropped).
fn relu_dropout(v: &mut [f64], mask: Option<&[f64]>) -> Vec<f64> {
    v.iter_mut()
        .enumerate()
        .map(|(i, x)| {
            let m = if *x > 0.0 { mask.map_or(1.0, |m| m[i]) } else { 0.0 };
            *x *= m;
            m
        })
        .collect()
}

struct DenseTrace {
    pooled: Vec<f64>,
    h1: Vec<f64>,
    m1: Vec<f64>,
    h2: Vec<f64>,
    m2: Vec<f64>,
    logits: Vec<f64>,
    /// Post-ReLU fc2 activations before dropout.
    embedding: Vec<f64>,
}

fn dense_stage(pooled: Vec<f64>, batch: usize, params: &WordCnnParams, masks: Option<(&[f64], &[f64])>) -> DenseTrace {
    let mut h1 = dense_forward(&pooled, batch, params.t(FC1_WEIGHT), params.t(FC1_BIAS));
    let m1 = relu_dropout(&mut h1, masks.map(|m| m.0));
    let mut h2 = dense_forward(&h1, batch, params.t(FC2_WEIGHT), params.t(FC2_BIAS));
    let embedding = h2.iter().map(|v| v.max(0.0)).collect();
    let m2 = relu_dropout(&mut h2, masks.map(|m| m.1));
    let logits = dense_forward(&h2, batch, params.t(OUT_WEIGHT), params.t(OUT_BIAS));
    DenseTrace { pooled, h1, m1, h2, m2, logits, embedding }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    /// Post-ReLU penultimate activations with dropout disabled.
    pub embedding: Vec<f64>,
}

/// Dropout masks for `batch` examples, drawn from one seeded stream.
fn batch_masks(arch: &WordCnnArch, batch: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m1 = Vec::with_capacity(batch * arch.fc1);
    let mut m2 = Vec::with_capacity(batch * arch.fc2);
    for _ in 0..batch {
        m1.extend(dropout_mask(arch.fc1, arch.dropout, rng.gen())?);
        m2.extend(dropout_mask(arch.fc2, arch.dropout, rng.gen())?);
    }
    Ok((m1, m2))
}

/// Forward passes for a batch. `seed` only matters in train mode.
pub fn forward_batch(specs: &[&Spectrogram], params: &WordCnnParams, mode: Mode, seed: u64) -> Result<Vec<ForwardOutput>> {
    let (_, trace) = run_forward(specs, params, mode, seed)?;
    let (v, e) = (params.arch.vocab_size, params.arch.fc2);
    Ok((0..specs.len())
        .map(|b| ForwardOutput {
            logits: trace.logits[b * v..(b + 1) * v].to_vec(),
            embedding: trace.embedding[b * e..(b + 1) * e].to_vec(),
        })
        .collect())
}

fn run_forward(specs: &[&Spectrogram], params: &WordCnnParams, mode: Mode, seed: u64) -> Result<(Vec<ConvCache>, DenseTrace)> {
    let d1 = params.arch.fc1_input()?;
    let mut caches = Vec::with_capacity(specs.len());
    let mut pooled = Vec::with_capacity(specs.len() * d1);
    for s in specs {
        let (cache, p) = conv_stage(s, params)?;
        caches.push(cache);
        pooled.extend(p);
    }
    let masks = match mode {
        Mode::Train => Some(batch_masks(&params.arch, specs.len(), seed)?),
        Mode::Eval => None,
    };
    let trace = dense_stage(pooled, specs.len(), params, masks.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())));
    Ok((caches, trace))
}

pub fn forward(spec: &Spectrogram, params: &WordCnnParams, mode: Mode, seed: u64) -> Result<ForwardOutput> {
    Ok(forward_batch(&[spec], params, mode, seed)?.remove(0))
}

/// The eval-mode penultimate activations.
pub fn embed_word(spec: &Spectrogram, params: &WordCnnParams) -> Result<Vec<f64>> {
    Ok(forward(spec, params, Mode::Eval, 0)?.embedding)
}

/// Mean cross-entropy over the batch and its gradient for every trainable tensor.
pub fn loss_and_grads(
    batch: &[(&Spectrogram, usize)],
    params: &WordCnnParams,
    mode: Mode,
    seed: u64,
) -> Result<(f64, NamedTensors)> {
    if batch.is_empty() {
        return Err(Error::Input("empty minibatch".into()));
    }
    let arch = &params.arch;
    let n = batch.len();
    let specs: Vec<&Spectrogram> = batch.iter().map(|b| b.0).collect();
    let (caches, trace) = run_forward(&specs, params, mode, seed)?;
    let v = arch.vocab_size;
    let mut loss = 0.0;
    let mut d_logits = vec![0.0; n * v];
    for (b, &(_, label)) in batch.iter().enumerate() {
        let z = Tensor::from_vec(trace.logits[b * v..(b + 1) * v].to_vec());
        let (l, probs) = softmax_xent(&z, label)?;
        loss += l;
        for (j, p) in probs.data().iter().enumerate() {
            d_logits[b * v + j] = (p - if j == label { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    let mut grads = params.zero_grads();
    let mut take = |k: &str| std::mem::replace(grads.get_mut(k).unwrap(), Tensor::zeros(&[1]));
    let (mut g_ow, mut g_ob) = (take(OUT_WEIGHT), take(OUT_BIAS));
    let (mut g_2w, mut g_2b) = (take(FC2_WEIGHT), take(FC2_BIAS));
    let (mut g_1w, mut g_1b) = (take(FC1_WEIGHT), take(FC1_BIAS));
    let mut d_h2 = dense_backward(&trace.h2, n, params.t(OUT_WEIGHT), &d_logits, &mut g_ow, &mut g_ob, true);
    d_h2.iter_mut().zip(&trace.m2).for_each(|(g, m)| *g *= m);
    let mut d_h1 = dense_backward(&trace.h1, n, params.t(FC2_WEIGHT), &d_h2, &mut g_2w, &mut g_2b, true);
    d_h1.iter_mut().zip(&trace.m1).for_each(|(g, m)| *g *= m);
    let d_pooled = dense_backward(&trace.pooled, n, params.t(FC1_WEIGHT), &d_h1, &mut g_1w, &mut g_1b, true);
    for (name, t) in [(OUT_WEIGHT, g_ow), (OUT_BIAS, g_ob), (FC2_WEIGHT, g_2w), (FC2_BIAS, g_2b), (FC1_WEIGHT, g_1w), (FC1_BIAS, g_1b)] {
        grads.insert(name.into(), t);
    }
    let d1 = arch.fc1_input()?;
    for (b, cache) in caches.iter().enumerate() {
        conv_stage_backward(cache, &d_pooled[b * d1..(b + 1) * d1], params, &mut grads)?;
    }
    Ok((loss / n as f64, grads))
}

/// 1-based rank of `label` among the logits; ties favour the lower index.
pub fn label_rank(logits: &[f64], label: usize) -> usize {
    let z = logits[label];
    1 + logits.iter().enumerate().filter(|&(j, &v)| v > z || (v == z && j < label)).count()
}

/// ReLU signs, dropout survivors and pooling winners of a forward pass.
/// Two parameter settings with equal patterns lie in the same linear
/// piece of the network, which gradient tests use to screen out kinks.
#[doc(hidden)]
pub fn activation_pattern(specs: &[&Spectrogram], params: &WordCnnParams, mode: Mode, seed: u64) -> Result<Vec<usize>> {
    let (caches, trace) = run_forward(specs, params, mode, seed)?;
    let mut pattern = Vec::new();
    for c in &caches {
        pattern.extend(c.relu.data().iter().map(|&v| usize::from(v > 0.0)));
        pattern.extend(&c.argmax);
    }
    pattern.extend(trace.m1.iter().chain(&trace.m2).map(|&m| usize::from(m != 0.0)));
    pattern.extend(trace.embedding.iter().map(|&v| usize::from(v > 0.0)));
    Ok(pattern)
}
