//! Mixup/CutMix batch mixing, target construction for CE and BCE, and the
//! two losses.

mod loss;
mod mixing;
mod targets;

pub use loss::{bce_loss, ce_loss};
pub use mixing::{cutmix_box, mix_batch, sample_lambda, MixBox, MixConfig, MixMethod, MixMode, MixOutcome};
pub use targets::{build_targets, BceStyle, LossKind, TargetMatrix, TargetSemantics};
