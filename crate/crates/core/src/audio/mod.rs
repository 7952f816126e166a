//! Word audio to fixed-width, normalized log-mel spectrograms.

mod mel;
mod spectrogram;
mod wav;

pub use mel::{band_centers_hz, hz_to_mel, mel_edges, mel_to_hz, FrontendConfig, MelFilterbank, N_MELS};
pub use spectrogram::{fit_to_width, log_mel_spectrogram, normalize_spectrogram, Frontend, Spectrogram};
pub use wav::{read_wav, write_wav, Waveform, SAMPLE_RATE};
