use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::mel::{FrontendConfig, MelFilterbank};
use super::wav::Waveform;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mel bands × frames grid (frequency on rows, time on columns).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    values: Tensor,
}

impl Spectrogram {
    pub fn from_tensor(values: Tensor) -> Result<Self> {
        if values.rank() != 2 {
            return Err(Error::shape(format!("spectrogram must be bands×frames, got {:?}", values.dims())));
        }
        Ok(Self { values })
    }

    pub fn n_bands(&self) -> usize {
        self.values.dims()[0]
    }

    pub fn n_frames(&self) -> usize {
        self.values.dims()[1]
    }

    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.values.data()[band * self.n_frames() + frame]
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.values
    }

    pub fn into_tensor(self) -> Tensor {
        self.values
    }
}

/// Reusable frontend: holds the filterbank, window and FFT plan.
pub struct Frontend {
    cfg: FrontendConfig,
    filterbank: MelFilterbank,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Frontend {
    pub fn new(cfg: FrontendConfig) -> Result<Self> {
        let filterbank = MelFilterbank::new(&cfg)?;
        let n = cfg.window_len();
        // symmetric Hamming
        let window = (0..n)
            .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
        Ok(Self { cfg, filterbank, window, fft })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        let win = self.cfg.window_len();
        if n_samples < win {
            0
        } else {
            (n_samples - win) / self.cfg.shift_len() + 1
        }
    }

    pub fn log_mel_spectrogram(&self, wave: &Waveform) -> Result<Spectrogram> {
        if wave.sample_rate != self.cfg.sample_rate {
            return Err(Error::format(0, format!("sample rate {} Hz, expected {}", wave.sample_rate, self.cfg.sample_rate)));
        }
        let win = self.cfg.window_len();
        let frames = self.n_frames(wave.samples.len());
        if frames == 0 {
            return Err(Error::Input(format!(
                "waveform has {} samples, fewer than one {win}-sample window",
                wave.samples.len()
            )));
        }
        let shift = self.cfg.shift_len();
        let n_mels = self.cfg.n_mels;
        let n_bins = self.filterbank.n_bins;
        let mut out = vec![0.0; n_mels * frames];
        let mut buf = vec![Complex::new(0.0, 0.0); self.cfg.fft_size];
        let mut power = vec![0.0; n_bins];
        let mut energies = vec![0.0; n_mels];
        for t in 0..frames {
            let chunk = &wave.samples[t * shift..t * shift + win];
            for (slot, (&s, &w)) in buf.iter_mut().zip(chunk.iter().zip(&self.window)) {
                *slot = Complex::new(s * w, 0.0);
            }
            buf[win..].fill(Complex::new(0.0, 0.0));
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            self.filterbank.apply(&power, &mut energies);
            for (band, &e) in energies.iter().enumerate() {
                out[band * frames + t] = e.max(self.cfg.log_floor).ln();
            }
        }
        Spectrogram::from_tensor(Tensor::new(vec![n_mels, frames], out)?)
    }

    /// Extract, normalize, then pad/truncate to the target width.
    pub fn featurize(&self, wave: &Waveform) -> Result<Spectrogram> {
        let spec = self.log_mel_spectrogram(wave)?;
        Ok(fit_to_width(&normalize_spectrogram(&spec), self.cfg.target_frames))
    }
}

pub fn log_mel_spectrogram(wave: &Waveform, cfg: &FrontendConfig) -> Result<Spectrogram> {
    Frontend::new(cfg.clone())?.log_mel_spectrogram(wave)
}

/// Subtracts the global mean and divides by the global population standard
/// deviation (or by 1 when that is below 1e-8).
pub fn normalize_spectrogram(spec: &Spectrogram) -> Spectrogram {
    let v = spec.values.data();
    if v.iter().all(|&x| x == v[0]) {
        // Exact zeros; the rounded mean would otherwise leave ~1e-15 residue.
        return Spectrogram {
            values: spec.values.map(|_| 0.0),
        };
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let div = if std < 1e-8 { 1.0 } else { std };
    Spectrogram {
        values: spec.values.map(|x| (x - mean) / div),
    }
}

/// Zero-pads or truncates the time axis symmetrically to exactly `target`
/// frames; the odd frame goes on the right.
pub fn fit_to_width(spec: &Spectrogram, target: usize) -> Spectrogram {
    assert!(target >= 1, "target width must be positive");
    let bands = spec.n_bands();
    let t = spec.n_frames();
    let mut out = vec![0.0; bands * target];
    let src = spec.values.data();
    if t <= target {
        let left = (target - t) / 2;
        for b in 0..bands {
            out[b * target + left..b * target + left + t].copy_from_slice(&src[b * t..(b + 1) * t]);
        }
    } else {
        let left = (t - target) / 2;
        for b in 0..bands {
            out[b * target..(b + 1) * target].copy_from_slice(&src[b * t + left..b * t + left + target]);
        }
    }
    Spectrogram {
        values: Tensor::new(vec![bands, target], out).expect("dims computed above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::mel::band_centers_hz;
    use crate::audio::SAMPLE_RATE;
    use proptest::prelude::*;

    fn grid(bands: usize, frames: usize, mut f: impl FnMut(usize, usize) -> f64) -> Spectrogram {
        let data = (0..bands * frames).map(|i| f(i / frames, i % frames)).collect();
        Spectrogram::from_tensor(Tensor::new(vec![bands, frames], data).unwrap()).unwrap()
    }

    fn tone(freq: f64, n: usize) -> Waveform {
        let s = (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(SAMPLE_RATE)).sin())
            .collect();
        Waveform::new(s, SAMPLE_RATE).unwrap()
    }

    #[test]
    fn one_second_gives_98_frames() {
        let fe = Frontend::new(FrontendConfig::default()).unwrap();
        let spec = fe.log_mel_spectrogram(&tone(440.0, 16000)).unwrap();
        assert_eq!((spec.n_bands(), spec.n_frames()), (40, 98));
        assert_eq!(fe.featurize(&tone(440.0, 16000)).unwrap().n_frames(), 100);
    }

    #[test]
    fn too_short_is_input_error() {
        let fe = Frontend::new(FrontendConfig::default()).unwrap();
        assert!(matches!(fe.log_mel_spectrogram(&tone(440.0, 399)), Err(Error::Input(_))));
        assert_eq!(fe.log_mel_spectrogram(&tone(440.0, 400)).unwrap().n_frames(), 1);
    }

    #[test]
    fn silence_hits_log_floor() {
        let cfg = FrontendConfig::default();
        let spec = log_mel_spectrogram(&Waveform::new(vec![0.0; 4000], SAMPLE_RATE).unwrap(), &cfg).unwrap();
        let floor = cfg.log_floor.ln();
        assert!(spec.as_tensor().data().iter().all(|&v| v == floor));
        let norm = normalize_spectrogram(&spec);
        assert!(norm.as_tensor().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_peaks_in_nearest_band() {
        let cfg = FrontendConfig::default();
        let centers = band_centers_hz(&cfg);
        for freq in [300.0, 1000.0, 2500.0, 5000.0] {
            let expected = (0..centers.len())
                .min_by(|&a, &b| (centers[a] - freq).abs().total_cmp(&(centers[b] - freq).abs()))
                .unwrap();
            let spec = log_mel_spectrogram(&tone(freq, 8000), &cfg).unwrap();
            for t in 0..spec.n_frames() {
                let best = (0..40).max_by(|&a, &b| spec.get(a, t).total_cmp(&spec.get(b, t))).unwrap();
                assert_eq!(best, expected, "{freq} Hz frame {t}");
            }
        }
    }

    #[test]
    fn normalization_cases() {
        let c = normalize_spectrogram(&grid(3, 4, |_, _| 7.5));
        assert!(c.as_tensor().data().iter().all(|&v| v == 0.0));
        let two = normalize_spectrogram(&grid(1, 2, |_, t| 2.0 * t as f64));
        assert_eq!(two.as_tensor().data(), &[-1.0, 1.0]);
    }

    #[test]
    fn fit_to_width_cases() {
        let s98 = grid(2, 98, |_, t| t as f64 + 1.0);
        let f = fit_to_width(&s98, 100);
        assert_eq!(f.get(0, 0), 0.0);
        assert_eq!(f.get(0, 1), 1.0);
        assert_eq!(f.get(1, 98), 98.0);
        assert_eq!(f.get(1, 99), 0.0);

        let s120 = grid(2, 120, |_, t| t as f64);
        let f = fit_to_width(&s120, 100);
        assert_eq!(f.get(0, 0), 10.0);
        assert_eq!(f.get(0, 99), 109.0);

        let s99 = grid(1, 99, |_, t| t as f64 + 1.0);
        let f = fit_to_width(&s99, 100);
        assert_eq!(f.get(0, 0), 1.0);
        assert_eq!(f.get(0, 98), 99.0);
        assert_eq!(f.get(0, 99), 0.0);
    }

    proptest! {
        #[test]
        fn normalized_moments(seed in 0u64..1000, frames in 2usize..120) {
            use rand::{SeedableRng, Rng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = grid(40, frames, |_, _| rng.gen_range(-30.0..5.0));
            let n = normalize_spectrogram(&s);
            let v = n.as_tensor().data();
            let len = v.len() as f64;
            let mean = v.iter().sum::<f64>() / len;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / len;
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((var - 1.0).abs() < 1e-8);
        }

        #[test]
        fn fit_is_idempotent_and_contiguous(frames in 1usize..250, target in 1usize..150) {
            let s = grid(3, frames, |b, t| (b * 1000 + t + 1) as f64);
            let f = fit_to_width(&s, target);
            prop_assert_eq!(f.n_frames(), target);
            prop_assert_eq!(&fit_to_width(&f, target), &f);
            // nonzero content is one contiguous run of consecutive source frames
            let row: Vec<f64> = (0..target).map(|t| f.get(0, t)).filter(|&v| v != 0.0).collect();
            prop_assert_eq!(row.len(), frames.min(target));
            for w in row.windows(2) {
                prop_assert_eq!(w[1] - w[0], 1.0);
            }
        }

        #[test]
        fn louder_means_higher_energy(seed in 0u64..200, gain in 1.01f64..4.0) {
            use rand::{SeedableRng, Rng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let base: Vec<f64> = (0..2000).map(|_| rng.gen_range(-0.2..0.2)).collect();
            let cfg = FrontendConfig::default();
            let a = log_mel_spectrogram(&Waveform::new(base.clone(), SAMPLE_RATE).unwrap(), &cfg).unwrap();
            let b = log_mel_spectrogram(&Waveform::new(base.iter().map(|x| x * gain).collect(), SAMPLE_RATE).unwrap(), &cfg).unwrap();
            let floor = cfg.log_floor.ln();
            for (x, y) in a.as_tensor().data().iter().zip(b.as_tensor().data()) {
                if *x > floor {
                    prop_assert!(y > x);
                }
            }
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let fe = Frontend::new(FrontendConfig::default()).unwrap();
        let w = tone(700.0, 12345);
        assert_eq!(fe.featurize(&w).unwrap(), fe.featurize(&w).unwrap());
    }
}
