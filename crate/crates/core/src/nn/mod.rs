//! Minimal dense-tensor engine: the layer set the segmentation networks are
//! built from, reverse-mode gradients, ADAM, and cross-entropy loss.

pub mod adam;
pub mod gradcheck;
pub mod init;
pub mod layer;
pub mod loss;
pub mod tensor;

pub use adam::AdamState;
pub use layer::{Aux, BatchNorm, Conv2d, Deconv2d, Layer, Mode};
pub use loss::{cross_entropy, LossSpace};
pub use tensor::{Scalar, Tensor};
