//! Randomized model zoo: architecture sampling, SAE pretraining, ensemble
//! training and bundle persistence.

mod arch;
mod bundle;
mod ensemble;
mod sae;

pub use arch::{
    sample_cnn_arch, sample_sae_arch, CnnArch, CnnArchRange, SaeArch, SaeArchRange, MAX_CNN_BLOCKS,
    SAE_INPUT_DIM,
};
pub use bundle::{BUNDLE_FORMAT_VERSION, BUNDLE_META_FILE};
pub use ensemble::{
    cnn_tensor, member_seed, sae_tensor, train_cnn_member, train_ensemble,
    train_ensemble_with_progress, train_sae_member, CnnMember, EnsembleBundle, EnsembleConfig,
    InputSpec, LabeledImages, MemberKind, SaeMember,
};
pub use sae::{finetune_sae, pretrain_sae, reconstruction_mse, EncoderStack, Pretrained};
