//! Class prototypes, the prototype contrastive loss, and teacher updates.

mod ema;
mod loss;
mod prototypes;

pub use ema::{ema_update, ema_update_tensor, DEFAULT_ALPHA};
pub use loss::{
    pixel_cross_entropy, project, proto_loss, proto_loss_grad, proto_loss_with_grad,
    prototype_loss, similarity, total_loss, AlignConfig, CrossEntropy, ProjectionHead, PROB_FLOOR,
};
pub use prototypes::{
    accumulate_prototypes, downsample_labels, finalize_prototypes, BankSidecar,
    PrototypeAccumulator, PrototypeBank,
};
