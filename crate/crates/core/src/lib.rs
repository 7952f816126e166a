//! Joint embedding of spoken-word spectrograms and image-region features.
//!
//! The crate covers the full pipeline: a log-mel audio frontend, a
//! spectrogram CNN trained as an isolated-word classifier whose penultimate
//! layer provides word vectors, an alignment model mapping word vectors and
//! region vectors into a shared space under a max-margin ranking objective,
//! and image search / annotation evaluation with recall@K.

pub mod align;
pub mod audio;
pub mod cli;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod layers;
pub mod optim;
pub mod retrieval;
pub mod synth;
pub mod tensor;
pub mod wordcnn;

pub use error::{Error, Result};
pub use tensor::{LayerGrad, NamedTensors, Tensor};
