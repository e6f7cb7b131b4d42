use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, FreezeSelection};
use super::pretrain::{clean_lr, train_baseline, PretrainReport};
use crate::adapt::{adapt_image, run_stream, AdaptConfig, Adapted, CellMean, MetricsReport, MetricsRow, StreamItem};
use crate::benchgen::{build_domain, DomainDataset, DomainId};
use crate::classifier::{
    synthesize_training_patches, train_classifier, Classifier, ClassifierReport, DegradationPredictor, FixedLabel,
};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::degrade::DegradationLabel;
use crate::imaging::{psnr, read_png, ssim, write_png, Image};
use crate::nn::{load_sr_model, save_sr_model, SrModel};
use crate::preserve::{
    fisher_scores, freeze_count, random_frozen, select_frozen, FisherScores, FrozenMask, STOCHASTIC_RESTORE_RATE,
};
use crate::rng;

/// Crate version with the git description captured at build time.
pub fn version() -> String {
    format!("{}-{}", env!("CARGO_PKG_VERSION"), option_env!("SRTTA_GIT_DESCRIBE").unwrap_or("unknown"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}

/// Pretrains the SR model on the training corpus and saves it.
pub fn pretrain(cfg: &ExperimentConfig) -> Result<PretrainReport> {
    cfg.validate()?;
    let corpus: Vec<Image> = cfg.train_corpus.load()?.into_iter().map(|c| c.image).collect();
    let pcfg = super::PretrainConfig {
        seed: rng::derive_seed(cfg.seed, &[rng::tag("pretrain"), cfg.pretrain.seed]),
        ..cfg.pretrain.clone()
    };
    let (model, report) = train_baseline(&corpus, &pcfg)?;
    if report.gain_db() < 1.0 {
        warn!("pretrained model beats bicubic by only {:.3} dB", report.gain_db());
    }
    save_sr_model(&model, cfg.sr_checkpoint_path())?;
    write_json(&cfg.out_dir.join("pretrain_report.json"), &report)?;
    Ok(report)
}

/// Synthesizes labeled patches from the training corpus, trains the
/// degradation classifier and saves it.
pub fn train_degradation_classifier(cfg: &ExperimentConfig) -> Result<ClassifierReport> {
    cfg.validate()?;
    let corpus = cfg.train_corpus.load()?;
    let mut r = rng::stream(cfg.seed, &[rng::tag("classifier-patches")]);
    let patches = synthesize_training_patches(&corpus, &cfg.patches, &mut r)?;
    let tcfg = crate::classifier::ClassifierTrainConfig {
        seed: rng::derive_seed(cfg.seed, &[rng::tag("classifier"), cfg.classifier_train.seed]),
        ..cfg.classifier_train.clone()
    };
    let (c, report) = train_classifier(&patches, &tcfg)?;
    c.save(cfg.classifier_path())?;
    write_json(&cfg.out_dir.join("classifier_report.json"), &report)?;
    Ok(report)
}

/// Builds every configured domain (plus the clean domain when forgetting is
/// evaluated) from the test corpus and writes them under the dataset root.
pub fn benchgen(cfg: &ExperimentConfig) -> Result<Vec<DomainDataset>> {
    cfg.validate()?;
    let corpus = cfg.test_corpus.load()?;
    let seed = rng::derive_seed(cfg.seed, &[rng::tag("benchgen")]);
    let root = cfg.dataset_path();
    let mut domains = cfg.domains.clone();
    if cfg.evaluate_forgetting && !domains.contains(&DomainId::Clean) {
        domains.push(DomainId::Clean);
    }
    domains
        .into_iter()
        .map(|d| {
            let ds = build_domain(&corpus, d, cfg.scale, seed)?;
            ds.write(&root)?;
            info!("built {} ({} images)", d, ds.entries.len());
            Ok(ds)
        })
        .collect()
}

/// Clean-set PSNR after one domain of one method's stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingPoint {
    pub method: String,
    pub after_domain: String,
    pub clean_psnr_db: f64,
    /// Pretrained clean PSNR minus `clean_psnr_db`.
    pub drop_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub seed: u64,
    pub frozen_scalars: usize,
    pub adaptable_scalars: usize,
    pub cells: Vec<CellMean>,
    /// Per method, the mean over configured domains of the per-domain mean PSNR.
    pub method_means: Vec<(String, Option<f64>)>,
    pub pretrained_clean_psnr_db: Option<f64>,
    pub forgetting: Vec<ForgettingPoint>,
    pub total_seconds: f64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub summary: Summary,
}

/// Prefix of the `domain` cell of anti-forgetting rows.
pub const CLEAN_ROW_PREFIX: &str = "clean@";

fn fisher_set(cfg: &ExperimentConfig) -> Result<Vec<Image>> {
    cfg.train_corpus
        .load()?
        .iter()
        .take(cfg.fisher_images)
        .map(|c| clean_lr(&c.image, cfg.scale))
        .collect()
}

/// Frozen mask and stochastic-restore rate for one configuration; importance
/// scores are computed on first use and cached in `scores`.
fn build_mask(
    reference: &SrModel<f32>,
    cfg: &ExperimentConfig,
    scores: &mut Option<FisherScores>,
) -> Result<(FrozenMask, Option<f64>)> {
    let rho = cfg.adapt.rho;
    Ok(match cfg.selection {
        FreezeSelection::Stochastic => (FrozenMask::none(reference), Some(STOCHASTIC_RESTORE_RATE)),
        FreezeSelection::Random => {
            let mut r = rng::stream(cfg.seed, &[rng::tag("random-mask")]);
            (random_frozen(reference, rho, &mut r)?, None)
        }
        // Extreme ratios do not depend on the scores.
        FreezeSelection::Fisher if rho == 0.0 => (FrozenMask::none(reference), None),
        FreezeSelection::Fisher if rho == 1.0 => (FrozenMask::from_fn(reference, |_, _| true), None),
        FreezeSelection::Fisher => {
            if scores.is_none() {
                let set = fisher_set(cfg)?;
                info!("importance scores over {} clean images", set.len());
                *scores = Some(fisher_scores(reference, &set)?);
            }
            (select_frozen(scores.as_ref().expect("just computed"), rho)?, None)
        }
    })
}

struct Inputs {
    reference: SrModel<f32>,
    classifier: Option<Classifier>,
    datasets: Vec<DomainDataset>,
    clean: Option<Vec<(Image, Image, String)>>,
    scores: Option<FisherScores>,
}

impl Inputs {
    fn load(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        cfg.check_inputs()?;
        let reference: SrModel<f32> = load_sr_model(cfg.sr_checkpoint_path())?;
        if reference.scale() != cfg.scale {
            return Err(Error::Config(format!("checkpoint scale {} vs configured {}", reference.scale(), cfg.scale)));
        }
        let classifier = if cfg.needs_classifier() { Some(Classifier::load(cfg.classifier_path())?) } else { None };
        let root = cfg.dataset_path();
        let datasets = cfg.domains.iter().map(|&d| DomainDataset::load(&root, d)).collect::<Result<Vec<_>>>()?;
        let clean = if cfg.evaluate_forgetting {
            let ds = DomainDataset::load(&root, DomainId::Clean)?;
            Some(ds.entries.into_iter().map(|e| (e.lr, e.hr, e.name)).collect())
        } else {
            None
        };
        Ok(Inputs { reference, classifier, datasets, clean, scores: None })
    }

    fn mask(&mut self, cfg: &ExperimentConfig) -> Result<(FrozenMask, Option<f64>)> {
        build_mask(&self.reference, cfg, &mut self.scores)
    }

    fn clean_scores(&self, model: &SrModel<f32>) -> Result<Vec<(String, f64, f64)>> {
        let mut out = Vec::new();
        for (lr, hr, name) in self.clean.iter().flatten() {
            let (pred, _) = model.predict(lr)?;
            out.push((name.clone(), psnr(&pred, hr)?, ssim(&pred, hr)?));
        }
        Ok(out)
    }
}

fn clean_rows(report: &mut MetricsReport, tag: &str, method: &str, scores: &[(String, f64, f64)]) -> f64 {
    for (name, p, s) in scores {
        report.push(MetricsRow {
            domain: format!("{CLEAN_ROW_PREFIX}{tag}"),
            method: method.into(),
            image: name.clone(),
            psnr_db: Some(*p),
            ssim: Some(*s),
            seconds: 0.0,
            error: None,
        });
    }
    scores.iter().map(|s| s.1).sum::<f64>() / scores.len().max(1) as f64
}

fn items_of(ds: &DomainDataset) -> Vec<StreamItem> {
    ds.entries
        .iter()
        .map(|e| StreamItem { name: e.name.clone(), domain: ds.domain.name().into(), lr: e.lr.clone(), hr: Some(e.hr.clone()) })
        .collect()
}

struct Cells {
    report: MetricsReport,
    forgetting: Vec<ForgettingPoint>,
    pretrained_clean: Option<f64>,
}

/// Runs every configured (method, domain) cell. Failures become error rows.
fn run_cells(
    inputs: &Inputs,
    cfg: &ExperimentConfig,
    mask: &FrozenMask,
    restore_rate: Option<f64>,
    save_lifelong: bool,
) -> Result<Cells> {
    let mut report = MetricsReport::default();
    let mut forgetting = Vec::new();
    let pretrained_clean = match &inputs.clean {
        Some(_) => Some(clean_rows(&mut report, "pretrained", "no-adapt", &inputs.clean_scores(&inputs.reference)?)),
        None => None,
    };
    for &em in &cfg.methods {
        let name = em.name();
        let acfg = AdaptConfig { mode: em.mode(), restore_rate, ..cfg.adapt.clone() };
        let mut model = inputs.reference.clone();
        mask.install(&mut model)?;
        for ds in &inputs.datasets {
            let domain = ds.domain.name();
            let oracle = FixedLabel(ds.domain.label());
            let predictor: &dyn DegradationPredictor = match &inputs.classifier {
                Some(c) if !cfg.oracle_labels => c,
                _ => &oracle,
            };
            let items = items_of(ds);
            match run_stream(&mut model, &inputs.reference, &items, predictor, &acfg, em.method(), cfg.seed) {
                Ok(out) => report.extend(out.report),
                Err(e) => {
                    warn!("{name} on {domain} failed: {e}");
                    report.push(MetricsRow::error(domain, &name, e.to_string()));
                }
            }
            if em.adapts() {
                if let Some(base) = pretrained_clean {
                    let mean = clean_rows(&mut report, &format!("after-{domain}"), &name, &inputs.clean_scores(&model)?);
                    forgetting.push(ForgettingPoint {
                        method: name.clone(),
                        after_domain: domain.into(),
                        clean_psnr_db: mean,
                        drop_db: base - mean,
                    });
                }
            }
        }
        if save_lifelong && em.mode() == crate::adapt::AdaptMode::Lifelong {
            save_sr_model(&model, cfg.out_dir.join(format!("adapted_{name}.bin")))?;
        }
    }
    Ok(Cells { report, forgetting, pretrained_clean })
}

fn load_or_build_mask(
    reference: &SrModel<f32>,
    cfg: &ExperimentConfig,
    scores: &mut Option<FisherScores>,
) -> Result<(FrozenMask, Option<f64>)> {
    let path = cfg.mask_path();
    if cfg.frozen_mask.is_some() && path.exists() && cfg.selection != FreezeSelection::Stochastic {
        let mask = FrozenMask::load(&path)?;
        let want = freeze_count(cfg.adapt.rho, reference.adaptable_scalar_count());
        if mask.frozen_count() != want {
            return Err(Error::Config(format!(
                "mask `{}` freezes {} scalars, rho {} needs {want}",
                path.display(),
                mask.frozen_count(),
                cfg.adapt.rho
            )));
        }
        info!("reusing frozen mask {}", path.display());
        return Ok((mask, None));
    }
    let (mask, rate) = build_mask(reference, cfg, scores)?;
    mask.save(&path)?;
    Ok((mask, rate))
}

/// Runs every configured method over every configured domain and writes
/// `metrics.csv`, `timing.csv` and `summary.json` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let start = Instant::now();
    let mut inputs = Inputs::load(cfg)?;
    let (mask, rate) = load_or_build_mask(&inputs.reference, cfg, &mut inputs.scores)?;
    let cells = run_cells(&inputs, cfg, &mask, rate, true)?;
    let report = cells.report;
    let names: Vec<String> = cfg.domains.iter().map(|d| d.name().to_string()).collect();
    let summary = Summary {
        version: version(),
        seed: cfg.seed,
        frozen_scalars: mask.frozen_count(),
        adaptable_scalars: mask.scalar_count(),
        cells: report.domain_means().into_iter().filter(|c| !c.domain.starts_with(CLEAN_ROW_PREFIX)).collect(),
        method_means: cfg.methods.iter().map(|m| (m.name(), report.method_mean(&m.name(), &names))).collect(),
        pretrained_clean_psnr_db: cells.pretrained_clean,
        forgetting: cells.forgetting,
        total_seconds: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
    };
    report.write_csv(cfg.out_dir.join("metrics.csv"), cfg.wall_clock_in_metrics)?;
    #[derive(Serialize)]
    struct Timing<'a> {
        domain: &'a str,
        method: &'a str,
        image: &'a str,
        seconds: f64,
    }
    let timing: Vec<Timing> = report
        .rows
        .iter()
        .filter(|r| !r.is_error() && !r.domain.starts_with(CLEAN_ROW_PREFIX))
        .map(|r| Timing { domain: &r.domain, method: &r.method, image: &r.image, seconds: r.seconds })
        .collect();
    write_atomic(&cfg.out_dir.join("timing.csv"), &csv_bytes(&timing)?)?;
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(ExperimentOutcome { report, summary })
}

/// One grid point and cell of an ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub alpha: f64,
    pub rho: f64,
    pub steps: usize,
    pub selection: FreezeSelection,
    pub method: String,
    pub domain: String,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    /// Clean-set PSNR drop after the method's last domain.
    pub clean_drop_db: Option<f64>,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

/// Runs the configured adaptive methods at every point of the ablation grid
/// and writes `ablation.csv` into the output directory.
pub fn ablate(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    if cfg.ablation.is_empty() {
        return Err(Error::Config("ablation requires at least one nonempty grid axis".into()));
    }
    let mut base = cfg.clone();
    base.methods.retain(|m| m.adapts());
    if base.methods.is_empty() {
        return Err(Error::Config("ablation needs at least one adapting method".into()));
    }
    let mut inputs = Inputs::load(&base)?;
    let g = &cfg.ablation;
    let mut rows = Vec::new();
    for &selection in &axis(&g.selection, cfg.selection) {
        for &rho in &axis(&g.rho, cfg.adapt.rho) {
            for &alpha in &axis(&g.alpha, cfg.adapt.alpha) {
                for &steps in &axis(&g.steps, cfg.adapt.steps) {
                    let point = ExperimentConfig {
                        adapt: AdaptConfig { alpha, rho, steps, ..cfg.adapt.clone() },
                        selection,
                        ..base.clone()
                    };
                    point.validate()?;
                    info!("ablation point alpha={alpha} rho={rho} steps={steps} selection={}", selection.name());
                    let (mask, rate) = inputs.mask(&point)?;
                    let cells = run_cells(&inputs, &point, &mask, rate, false)?;
                    for c in cells.report.domain_means().into_iter().filter(|c| !c.domain.starts_with(CLEAN_ROW_PREFIX)) {
                        let drop = cells.forgetting.iter().rev().find(|f| f.method == c.method).map(|f| f.drop_db);
                        rows.push(AblationRow {
                            alpha,
                            rho,
                            steps,
                            selection,
                            method: c.method,
                            domain: c.domain,
                            psnr_db: c.psnr_db,
                            ssim: c.ssim,
                            clean_drop_db: drop,
                        });
                    }
                }
            }
        }
    }
    write_atomic(&cfg.out_dir.join("ablation.csv"), &csv_bytes(&rows)?)?;
    Ok(rows)
}

/// Adapts on a single test image and writes the super-resolved result.
///
/// Without `label` the classifier decides. The frozen mask is reused from
/// the configured path when present.
pub fn adapt_file(
    cfg: &ExperimentConfig,
    input: &Path,
    output: &Path,
    label: Option<DegradationLabel>,
) -> Result<(DegradationLabel, Adapted)> {
    cfg.validate()?;
    let reference: SrModel<f32> = load_sr_model(cfg.sr_checkpoint_path())?;
    let x = read_png(input)?;
    let label = match label {
        Some(l) => l,
        None => Classifier::load(cfg.classifier_path())?.predict(&x)?,
    };
    let (mask, rate) = load_or_build_mask(&reference, cfg, &mut None)?;
    let mut model = reference.clone();
    mask.install(&mut model)?;
    let acfg = AdaptConfig { restore_rate: rate, ..cfg.adapt.clone() };
    let mut r = rng::stream(cfg.seed, &[rng::tag("adapt-file")]);
    let adapted = adapt_image(&mut model, &reference, &x, label, &acfg, &mut r)?;
    write_png(output, &adapted.prediction)?;
    Ok((label, adapted))
}
