use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pretrain::PretrainConfig;
use crate::adapt::{AdaptConfig, AdaptMode, Method};
use crate::benchgen::{load_png_corpus, procedural_corpus, CorpusImage, DomainDataset, DomainId};
use crate::classifier::{ClassifierTrainConfig, PatchConfig};
use crate::error::{Error, Result};
use crate::nn::SrArch;

/// Where HR images come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSource {
    Procedural { count: usize, side: usize, seed: u64 },
    /// Every PNG in a directory.
    Dir(PathBuf),
}

impl CorpusSource {
    pub fn load(&self) -> Result<Vec<CorpusImage>> {
        match self {
            CorpusSource::Procedural { count, side, seed } => procedural_corpus(*count, *side, *seed),
            CorpusSource::Dir(path) => load_png_corpus(path),
        }
    }
}

/// A method as named in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMethod {
    Srtta,
    SrttaLifelong,
    TtaC,
    NoAdapt,
}

impl ExperimentMethod {
    pub const ALL: [ExperimentMethod; 4] = [
        ExperimentMethod::NoAdapt,
        ExperimentMethod::TtaC,
        ExperimentMethod::Srtta,
        ExperimentMethod::SrttaLifelong,
    ];

    pub fn method(self) -> Method {
        match self {
            ExperimentMethod::Srtta | ExperimentMethod::SrttaLifelong => Method::Srtta,
            ExperimentMethod::TtaC => Method::TtaC,
            ExperimentMethod::NoAdapt => Method::NoAdapt,
        }
    }

    pub fn mode(self) -> AdaptMode {
        match self {
            ExperimentMethod::SrttaLifelong => AdaptMode::Lifelong,
            _ => AdaptMode::ParameterReset,
        }
    }

    pub fn name(self) -> String {
        self.method().label(self.mode())
    }

    pub fn adapts(self) -> bool {
        self != ExperimentMethod::NoAdapt
    }
}

impl FromStr for ExperimentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// How the preserved parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreezeSelection {
    /// Top-`rho` Fisher scores.
    Fisher,
    /// `rho` of the scalars uniformly at random.
    Random,
    /// Nothing frozen; a small random fraction is restored after every step.
    Stochastic,
}

impl FreezeSelection {
    pub fn name(self) -> &'static str {
        match self {
            FreezeSelection::Fisher => "fisher",
            FreezeSelection::Random => "random",
            FreezeSelection::Stochastic => "stochastic",
        }
    }
}

impl FromStr for FreezeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [FreezeSelection::Fisher, FreezeSelection::Random, FreezeSelection::Stochastic]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown freeze selection `{s}`")))
    }
}

/// Ablation axes; an empty axis keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationGrid {
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub steps: Vec<usize>,
    pub selection: Vec<FreezeSelection>,
}

impl AblationGrid {
    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty() && self.rho.is_empty() && self.steps.is_empty() && self.selection.is_empty()
    }
}

/// Everything one experiment needs. Unset paths default to files under
/// `out_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub scale: usize,
    /// HR images for pretraining, classifier patches and importance scores.
    pub train_corpus: CorpusSource,
    /// HR images the benchmark domains are built from.
    pub test_corpus: CorpusSource,
    pub pretrain: PretrainConfig,
    pub patches: PatchConfig,
    pub classifier_train: ClassifierTrainConfig,
    pub sr_checkpoint: Option<PathBuf>,
    pub classifier_checkpoint: Option<PathBuf>,
    pub dataset_root: Option<PathBuf>,
    /// Use each domain's true degradation types instead of the classifier.
    pub oracle_labels: bool,
    pub domains: Vec<DomainId>,
    pub methods: Vec<ExperimentMethod>,
    pub adapt: AdaptConfig,
    pub selection: FreezeSelection,
    /// Clean training images used for the importance scores.
    pub fisher_images: usize,
    /// Reused when present, written otherwise.
    pub frozen_mask: Option<PathBuf>,
    /// Score the clean domain before the stream and after every domain.
    pub evaluate_forgetting: bool,
    /// Write measured seconds into metrics.csv (otherwise zero, so the file
    /// is reproducible; timing.csv always has them).
    pub wall_clock_in_metrics: bool,
    pub ablation: AblationGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/desk"),
            scale: 2,
            train_corpus: CorpusSource::Procedural { count: 220, side: 96, seed: 11 },
            test_corpus: CorpusSource::Procedural { count: 20, side: 96, seed: 999 },
            pretrain: PretrainConfig {
                arch: SrArch::new(2, 16, 2).expect("valid architecture"),
                steps: 800,
                lr: 2e-3,
                val_images: 20,
                ..PretrainConfig::default()
            },
            patches: PatchConfig::default(),
            classifier_train: ClassifierTrainConfig::default(),
            sr_checkpoint: None,
            classifier_checkpoint: None,
            dataset_root: None,
            oracle_labels: false,
            domains: vec![DomainId::GaussianNoise],
            methods: vec![ExperimentMethod::NoAdapt, ExperimentMethod::TtaC, ExperimentMethod::Srtta],
            adapt: AdaptConfig { crop: 32, batch: 8, steps: 10, lr: 2e-2, ..AdaptConfig::default() },
            selection: FreezeSelection::Fisher,
            fisher_images: 8,
            frozen_mask: None,
            evaluate_forgetting: true,
            wall_clock_in_metrics: false,
            ablation: AblationGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn sr_checkpoint_path(&self) -> PathBuf {
        self.sr_checkpoint.clone().unwrap_or_else(|| self.out_dir.join("sr_model.bin"))
    }

    pub fn classifier_path(&self) -> PathBuf {
        self.classifier_checkpoint.clone().unwrap_or_else(|| self.out_dir.join("classifier.bin"))
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset_root.clone().unwrap_or_else(|| self.out_dir.join("bench"))
    }

    pub fn mask_path(&self) -> PathBuf {
        self.frozen_mask.clone().unwrap_or_else(|| self.out_dir.join("frozen_mask.bin"))
    }

    /// Checks values; does not touch the file system.
    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::Config("the domain list is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("the method list is empty".into()));
        }
        if self.adapt.scale != self.scale || self.pretrain.arch.scale != self.scale {
            return Err(Error::Config(format!(
                "scale {} disagrees with adapt.scale {} or pretrain.arch.scale {}",
                self.scale, self.adapt.scale, self.pretrain.arch.scale
            )));
        }
        self.adapt.validate()
    }

    /// Whether any configured method queries the degradation classifier.
    pub fn needs_classifier(&self) -> bool {
        !self.oracle_labels && self.methods.iter().any(|m| m.method() == Method::Srtta)
    }

    /// Checks that every input of a run exists.
    pub fn check_inputs(&self) -> Result<()> {
        let must_exist = |p: PathBuf, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} `{}` does not exist", p.display())))
            }
        };
        must_exist(self.sr_checkpoint_path(), "SR checkpoint")?;
        if self.needs_classifier() {
            must_exist(self.classifier_path(), "classifier checkpoint")?;
        }
        let root = self.dataset_path();
        for &d in &self.domains {
            must_exist(DomainDataset::manifest_path(&root, d), "dataset manifest")?;
        }
        if self.evaluate_forgetting {
            must_exist(DomainDataset::manifest_path(&root, DomainId::Clean), "clean dataset manifest")?;
        }
        Ok(())
    }
}
