//! Multi-label degradation classifier predicting (blur, noise, JPEG).

mod net;
mod train;

pub use crate::degrade::DegradationLabel;
pub use net::{
    label_from_probabilities, Classifier, DegradationPredictor, FixedLabel, CLASSIFIER_CHANNELS, PATCH_SIZE, THRESHOLD,
};
pub use train::{
    bce_with_logits, evaluate, synthesize_training_patches, train_classifier, ClassifierReport,
    ClassifierTrainConfig, LabeledPatch, PatchConfig, COARSE_CLASSES,
};
