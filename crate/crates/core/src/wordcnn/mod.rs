//! Spectrogram CNN trained as an isolated-word classifier. Its penultimate
//! activations serve as word vectors for the alignment model.

mod arch;
mod net;
mod train;

pub use arch::WordCnnArch;
pub use net::{
    activation_pattern, embed_word, estimate_mean_spectrogram, forward, forward_batch, label_rank, loss_and_grads, ForwardOutput,
    WordCnnParams, CONV_BIAS, CONV_FILTERS, FC1_BIAS, FC1_WEIGHT, FC2_BIAS, FC2_WEIGHT, OUT_BIAS, OUT_WEIGHT,
};
pub use train::{accuracy, pretrain, EpochStats, Labeled, PretrainConfig, PretrainReport, TopK};
