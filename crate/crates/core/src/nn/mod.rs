//! Small f64 neural-network engine: conv/batchnorm/relu/maxpool/dense
//! layers with hand-written backward passes, momentum SGD, scaled conjugate
//! gradient and a directory-based model format.

mod alloc;
mod gradcheck;
mod io;
mod layer;
mod network;
mod scg;
mod tensor;

pub use gradcheck::{finite_difference_check, kink_margin, relative_error};
pub use io::{load_model, save_model, MODEL_FORMAT_VERSION, MODEL_META_FILE};
pub use layer::{
    softmax_rows, BatchNorm, Conv2d, Dense, Init, Layer, LayerSpec, BN_EPSILON, BN_MOMENTUM,
};
pub use network::{
    argmax, cross_entropy, one_hot, train_step, train_supervised, Forward, LossCurve, Network,
    SgdState, TrainConfig, CE_FLOOR,
};
pub use scg::{scg_train, ScgConfig, ScgReport};
pub use tensor::Tensor;

pub(crate) use alloc::keep_freed_memory;
pub(crate) use network::{run_backward, run_forward, sgd_update};
