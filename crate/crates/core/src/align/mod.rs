//! Joint embedding of image regions and caption words, the max-margin
//! ranking objective, its training loop, and word-to-region alignment.

mod cost;
mod fit;
mod infer;
mod model;
mod records;

pub use cost::{cost_gradients, margin_cost, margin_cost_grad, MARGIN};
pub use fit::{fit, fit_from, FitConfig, FitReport};
pub use infer::{alignment_svg, infer_alignment, CaptionAlignment, WordAlignment};
pub use model::{
    batch_similarity, best_region, embed_caption, embed_image, embed_region, embed_word_vec,
    image_caption_similarity, score_embedded, unit_normalize, AlignInit, AlignParams, SimilarityMatrix,
    B_D, B_M, W_D, W_M,
};
pub use records::{CaptionRecord, Dataset, ImageRecord, REGIONS_PER_IMAGE};
