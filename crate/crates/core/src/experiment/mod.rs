//! Experiment harness: SR pretraining, configuration, benchmark building,
//! full runs and ablations.

mod config;
mod pretrain;
mod run;

pub use config::{AblationGrid, CorpusSource, ExperimentConfig, ExperimentMethod, FreezeSelection};
pub use pretrain::{clean_lr, evaluate_clean, train_baseline, PretrainConfig, PretrainReport, MIN_PRETRAIN_IMAGES};
pub use run::{
    ablate, adapt_file, benchgen, pretrain, run_experiment, train_degradation_classifier, version, AblationRow, ExperimentOutcome,
    ForgettingPoint, Summary, CLEAN_ROW_PREFIX,
};
