use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{conv2d_output_hw, maxpool_output_hw, Conv2dSpec, LrnSpec, PoolSpec};

/// Layer sizes of the word classifier. Layer types and order are fixed;
/// only extents vary, so a miniature instance exercises the same code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordCnnArch {
    pub n_bands: usize,
    pub n_frames: usize,
    pub channels: usize,
    /// Filter width in frames; the filter always spans every band.
    pub filter_w: usize,
    pub pad_h: usize,
    pub pool_h: usize,
    pub pool_w: usize,
    pub pool_stride_h: usize,
    pub pool_stride_w: usize,
    pub fc1: usize,
    pub fc2: usize,
    pub vocab_size: usize,
    pub dropout: f64,
    pub lrn_size: usize,
    pub lrn_alpha: f64,
    pub lrn_beta: f64,
    pub lrn_k: f64,
}

impl WordCnnArch {
    /// 40×100 input, 64 filters of 40×5, 3×4 pooling, two 1024-wide layers.
    pub fn standard(vocab_size: usize) -> Self {
        Self {
            n_bands: 40,
            n_frames: 100,
            channels: 64,
            filter_w: 5,
            pad_h: 1,
            pool_h: 3,
            pool_w: 4,
            pool_stride_h: 1,
            pool_stride_w: 2,
            fc1: 1024,
            fc2: 1024,
            vocab_size,
            dropout: 0.5,
            lrn_size: 5,
            lrn_alpha: 1e-4,
            lrn_beta: 0.75,
            lrn_k: 1.0,
        }
    }

    /// 8×10 input, 4 channels, 3 classes.
    pub fn miniature() -> Self {
        Self {
            n_bands: 8,
            n_frames: 10,
            channels: 4,
            fc1: 6,
            fc2: 5,
            ..Self::standard(3)
        }
    }

    pub fn conv_spec(&self) -> Conv2dSpec {
        Conv2dSpec::new(self.pad_h, 0, 1, 1)
    }

    pub fn pool_spec(&self) -> PoolSpec {
        PoolSpec::new(self.pool_h, self.pool_w, self.pool_stride_h, self.pool_stride_w)
    }

    pub fn lrn_spec(&self) -> LrnSpec {
        LrnSpec { size: self.lrn_size, alpha: self.lrn_alpha, beta: self.lrn_beta, k: self.lrn_k }
    }

    pub fn conv_out_hw(&self) -> Result<(usize, usize)> {
        conv2d_output_hw(self.n_bands, self.n_frames, self.n_bands, self.filter_w, self.conv_spec())
    }

    pub fn pool_out_hw(&self) -> Result<(usize, usize)> {
        let (h, w) = self.conv_out_hw()?;
        maxpool_output_hw(h, w, self.pool_spec())
    }

    /// Flattened pooled size feeding the first dense layer.
    pub fn fc1_input(&self) -> Result<usize> {
        let (h, w) = self.pool_out_hw()?;
        Ok(self.channels * h * w)
    }

    pub fn embedding_dim(&self) -> usize {
        self.fc2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("cnn.{key}"), msg));
        if self.n_bands == 0 || self.n_frames == 0 {
            return bad("n_bands", "input grid must be non-empty");
        }
        if self.channels == 0 || self.fc1 == 0 || self.fc2 == 0 {
            return bad("channels", "layer widths must be positive");
        }
        if self.vocab_size == 0 {
            return bad("vocab_size", "must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", "must lie in [0, 1)");
        }
        if self.lrn_size.is_multiple_of(2) || self.lrn_k <= 0.0 {
            return bad("lrn_size", "LRN needs an odd window and k > 0");
        }
        self.fc1_input().map_err(|e| Error::config("cnn", e.to_string()))?;
        Ok(())
    }
}
