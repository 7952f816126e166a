//! 16 kHz mono 16-bit PCM WAV input and output.

use std::path::Path;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono audio with samples scaled to [-1, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate != SAMPLE_RATE {
            return Err(Error::format(
                0,
                format!("unsupported sample rate {sample_rate} Hz (only {SAMPLE_RATE} Hz)"),
            ));
        }
        if samples.is_empty() {
            return Err(Error::Input("waveform has no samples".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Samples in `[start_ms, end_ms)`, clipped to the waveform.
    pub fn segment(&self, start_ms: u64, end_ms: u64) -> Result<Waveform> {
        let per_ms = u64::from(self.sample_rate) / 1000;
        let start = (start_ms * per_ms) as usize;
        let end = ((end_ms * per_ms) as usize).min(self.samples.len());
        if end_ms <= start_ms || start >= end {
            return Err(Error::Input(format!(
                "segment {start_ms}..{end_ms} ms is empty for a {} sample waveform",
                self.samples.len()
            )));
        }
        Waveform::new(self.samples[start..end].to_vec(), self.sample_rate)
    }
}

fn hound_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(0, format!("{}: {other}", path.display())),
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| hound_err(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::format(
            20,
            format!("{}: expected 16-bit integer PCM, got {:?} {}-bit", path.display(), spec.sample_format, spec.bits_per_sample),
        ));
    }
    if spec.channels != 1 {
        return Err(Error::format(22, format!("{}: expected mono, got {} channels", path.display(), spec.channels)));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::format(
            24,
            format!("{}: expected {SAMPLE_RATE} Hz, got {} Hz", path.display(), spec.sample_rate),
        ));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| hound_err(path, e))?;
    Waveform::new(samples, spec.sample_rate)
}

/// Writes 16-bit PCM, clamping samples to the representable range.
pub fn write_wav(path: impl AsRef<Path>, wave: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| hound_err(path, e))?;
    for &s in &wave.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| hound_err(path, e))?;
    }
    writer.finalize().map_err(|e| hound_err(path, e))
}
