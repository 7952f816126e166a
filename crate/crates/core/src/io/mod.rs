//! Tensor files, dataset manifests and parameter bundles.

mod bundle;
mod manifest;
mod tensor_file;

pub use bundle::{
    read_align_params, read_bundle, read_word_cnn, write_align_params, write_bundle, write_word_cnn, AlignHeader, WordCnnHeader,
    ALIGN_BUNDLE, WORD_CNN_BUNDLE,
};
pub use manifest::{
    load_dataset, read_manifest, write_dataset, write_manifest, Manifest, ManifestCaption, ManifestImage, SCHEMA_VERSION,
};
pub use tensor_file::{decode_tensor, encode_tensor, read_tensor, read_tensor_with_dtype, write_tensor, DType, MAGIC, VERSION};
