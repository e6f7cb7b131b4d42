//! Protection of pretrained knowledge: the dihedral augmentation group, the
//! augmentation consistency loss, Fisher importance scores, top-ratio
//! freezing and the stochastic-restoration baseline.

mod augment;
mod consistency;
mod fisher;
mod mask;

pub use augment::{augment8, AugmentOp, Augmented};
pub use consistency::{consistency_loss, consistency_loss_with_target, consistency_target};
pub use fisher::{
    fisher_scores, freeze_count, random_frozen, select_frozen, stochastic_restore, FisherScores,
    STOCHASTIC_RESTORE_RATE,
};
pub use mask::{FrozenMask, MASK_MAGIC, MASK_VERSION};
