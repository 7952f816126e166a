//! Triangular filters equally spaced on the HTK mel scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_MELS: usize = 40;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub window_ms: f64,
    pub shift_ms: f64,
    pub fft_size: usize,
    pub n_mels: usize,
    pub mel_low: f64,
    pub mel_high: f64,
    pub log_floor: f64,
    pub target_frames: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window_ms: 25.0,
            shift_ms: 10.0,
            fft_size: 512,
            n_mels: N_MELS,
            mel_low: 20.0,
            mel_high: 8000.0,
            log_floor: 1e-10,
            target_frames: 100,
        }
    }
}

impl FrontendConfig {
    pub fn window_len(&self) -> usize {
        (f64::from(self.sample_rate) * self.window_ms / 1000.0).round() as usize
    }

    pub fn shift_len(&self) -> usize {
        (f64::from(self.sample_rate) * self.shift_ms / 1000.0).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate != super::SAMPLE_RATE {
            return Err(Error::config("frontend.sample_rate", "only 16000 Hz is supported"));
        }
        if self.window_len() == 0 || self.shift_len() == 0 {
            return Err(Error::config("frontend.window_ms", "window and shift must be at least one sample"));
        }
        if self.fft_size < self.window_len() {
            return Err(Error::config("frontend.fft_size", "must be at least the window length in samples"));
        }
        if self.n_mels == 0 {
            return Err(Error::config("frontend.n_mels", "must be positive"));
        }
        if !(self.mel_low >= 0.0 && self.mel_low < self.mel_high) {
            return Err(Error::config("frontend.mel_low", "must be non-negative and below mel_high"));
        }
        if self.mel_high > f64::from(self.sample_rate) / 2.0 {
            return Err(Error::config("frontend.mel_high", "must not exceed the Nyquist frequency"));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::config("frontend.log_floor", "must be positive"));
        }
        if self.target_frames == 0 {
            return Err(Error::config("frontend.target_frames", "must be positive"));
        }
        Ok(())
    }
}

/// Dense `n_mels × (fft_size/2 + 1)` weight matrix.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &FrontendConfig) -> Result<Self> {
        cfg.validate()?;
        let n_bins = cfg.fft_size / 2 + 1;
        let edges = mel_edges(cfg);
        let bin_hz = f64::from(cfg.sample_rate) / cfg.fft_size as f64;
        let mut weights = vec![0.0; cfg.n_mels * n_bins];
        for band in 0..cfg.n_mels {
            let (lo, mid, hi) = (edges[band], edges[band + 1], edges[band + 2]);
            for bin in 0..n_bins {
                let m = hz_to_mel(bin as f64 * bin_hz);
                let w = if m > lo && m <= mid {
                    (m - lo) / (mid - lo)
                } else if m > mid && m < hi {
                    (hi - m) / (hi - mid)
                } else {
                    0.0
                };
                weights[band * n_bins + bin] = w;
            }
        }
        Ok(Self { n_mels: cfg.n_mels, n_bins, weights })
    }

    pub fn row(&self, band: usize) -> &[f64] {
        &self.weights[band * self.n_bins..(band + 1) * self.n_bins]
    }

    /// Filter energies for one power spectrum of `n_bins` values.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (band, o) in out.iter_mut().enumerate().take(self.n_mels) {
            *o = crate::tensor::dot(self.row(band), power);
        }
    }
}

/// The `n_mels + 2` band edges in mel, equally spaced from `mel_low` to `mel_high`.
pub fn mel_edges(cfg: &FrontendConfig) -> Vec<f64> {
    let lo = hz_to_mel(cfg.mel_low);
    let hi = hz_to_mel(cfg.mel_high);
    let steps = (cfg.n_mels + 1) as f64;
    (0..cfg.n_mels + 2).map(|i| lo + (hi - lo) * i as f64 / steps).collect()
}

/// Peak frequency of each band in Hz.
pub fn band_centers_hz(cfg: &FrontendConfig) -> Vec<f64> {
    mel_edges(cfg)[1..=cfg.n_mels].iter().map(|&m| mel_to_hz(m)).collect()
}
