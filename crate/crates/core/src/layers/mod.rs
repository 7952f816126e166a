//! Forward and backward kernels for every layer the word CNN and the
//! alignment model use.

mod conv;
mod dropout;
mod linear;
mod lrn;
mod pool;
mod relu;
mod softmax;

pub use conv::{conv2d, conv2d_backward, conv2d_output_hw, Conv2dSpec};
pub(crate) use conv::conv2d_backward_into;
pub use dropout::{dropout, dropout_backward, dropout_mask, DropoutMask, Mode};
pub use linear::{fc_backward, fully_connected};
pub use lrn::{lrn, lrn_backward, LrnSpec};
pub use pool::{maxpool, maxpool_backward, maxpool_min_gap, maxpool_output_hw, PoolSpec};
pub(crate) use relu::relu_mask_inplace;
pub use relu::{relu, relu_backward};
pub use softmax::{softmax, softmax_xent, softmax_xent_backward};
