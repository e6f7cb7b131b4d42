use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{label_from_probabilities, Classifier, PATCH_SIZE};
use crate::benchgen::{degrade_hr, CorpusImage, DomainId, DomainSpec};
use crate::degrade::DegradationLabel;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::preserve::AugmentOp;

/// Coarse training classes; degraded classes may carry extra components
/// when drawn from a mixed domain.
pub const COARSE_CLASSES: [&str; 4] = ["clean", "blur", "noise", "jpeg"];

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPatch {
    pub image: Image,
    pub label: DegradationLabel,
    /// Index into [`COARSE_CLASSES`].
    pub class: usize,
    /// The realized degradation that produced the patch.
    pub provenance: DomainSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchConfig {
    pub per_class: usize,
    pub patch: usize,
    pub scale: usize,
    /// Probability that a degraded patch comes from a mixed domain.
    pub mixed_fraction: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            per_class: 400,
            patch: PATCH_SIZE,
            scale: 2,
            mixed_fraction: 0.2,
        }
    }
}

fn pick_domain<R: Rng + ?Sized>(class: usize, mixed_fraction: f64, rng: &mut R) -> DomainId {
    use DomainId::*;
    if class == 0 {
        return Clean;
    }
    let has = |d: &DomainId| {
        let l = d.label();
        [l.blur, l.noise, l.jpeg][class - 1]
    };
    let pool: Vec<DomainId> = if rng.random_bool(mixed_fraction) {
        DomainId::MIXED.into_iter().filter(has).collect()
    } else {
        DomainId::SINGLE.into_iter().filter(has).collect()
    };
    pool[rng.random_range(0..pool.len())]
}

/// Draws `per_class` patches for each coarse class. Each patch is an LR crop
/// produced by degrading a random HR crop with the benchmark recipes.
pub fn synthesize_training_patches<R: Rng + ?Sized>(
    corpus: &[CorpusImage],
    cfg: &PatchConfig,
    rng: &mut R,
) -> Result<Vec<LabeledPatch>> {
    let hr_side = cfg.patch * cfg.scale;
    let usable: Vec<&CorpusImage> = corpus
        .iter()
        .filter(|c| {
            let ok = c.image.height() >= hr_side && c.image.width() >= hr_side;
            if !ok {
                warn!("skipping corpus image `{}`: smaller than {hr_side}x{hr_side}", c.name);
            }
            ok
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::TooSmall(format!("no corpus image reaches {hr_side}x{hr_side}")));
    }
    let mut out = Vec::with_capacity(4 * cfg.per_class);
    for class in 0..COARSE_CLASSES.len() {
        for _ in 0..cfg.per_class {
            let src = &usable[rng.random_range(0..usable.len())].image;
            let top = rng.random_range(0..=(src.height() - hr_side) / cfg.scale) * cfg.scale;
            let left = rng.random_range(0..=(src.width() - hr_side) / cfg.scale) * cfg.scale;
            let hr = src.crop(top, left, hr_side, hr_side)?;
            let domain = pick_domain(class, cfg.mixed_fraction, rng);
            let (image, provenance) = degrade_hr(&hr, domain, cfg.scale, rng)?;
            out.push(LabeledPatch {
                image,
                label: domain.label(),
                class,
                provenance,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::ClassBalance("no patches were synthesized".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub final_lr: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch: 16,
            lr: 3e-3,
            final_lr: 1e-6,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub best_epoch: usize,
    /// Held-out accuracy of the selected parameters, per label (blur, noise, JPEG).
    pub val_accuracy: [f64; 3],
    pub train_size: usize,
    pub val_size: usize,
}

impl ClassifierReport {
    pub fn macro_accuracy(&self) -> f64 {
        self.val_accuracy.iter().sum::<f64>() / 3.0
    }
}

/// Mean binary cross-entropy over the three labels, and its logit gradient.
pub fn bce_with_logits(logits: [f64; 3], label: DegradationLabel) -> (f64, [f64; 3]) {
    let t = label.as_array().map(f64::from);
    let mut loss = 0.0;
    let mut grad = [0.0; 3];
    for k in 0..3 {
        let z = logits[k];
        // log(1 + e^z) - t z, stable for both signs.
        loss += z.max(0.0) - t[k] * z + (-z.abs()).exp().ln_1p();
        let p = 1.0 / (1.0 + (-z).exp());
        grad[k] = (p - t[k]) / 3.0;
    }
    (loss / 3.0, grad)
}

/// Per-label accuracy of `c` on `patches`.
pub fn evaluate(c: &Classifier, patches: &[LabeledPatch]) -> Result<[f64; 3]> {
    let mut hits = [0usize; 3];
    for p in patches {
        let pred = label_from_probabilities(c.probabilities(&p.image)?).as_array();
        let truth = p.label.as_array();
        for k in 0..3 {
            hits[k] += usize::from(pred[k] == truth[k]);
        }
    }
    Ok(hits.map(|h| h as f64 / patches.len().max(1) as f64))
}

fn check_balance(patches: &[LabeledPatch]) -> Result<()> {
    let mut counts = [0usize; 4];
    for p in patches {
        let a = p.label.as_array();
        counts[0] += usize::from(p.label.is_clean());
        for k in 0..3 {
            counts[k + 1] += usize::from(a[k] == 1);
        }
    }
    if let Some(k) = (0..4).find(|&k| counts[k] < 50) {
        return Err(Error::ClassBalance(format!(
            "class `{}` has {} patches, at least 50 required (counts {counts:?})",
            COARSE_CLASSES[k], counts[k]
        )));
    }
    Ok(())
}

/// Trains with Adam, a cosine learning-rate decay and random dihedral
/// augmentation, returning the parameters with the best held-out macro
/// accuracy.
pub fn train_classifier(patches: &[LabeledPatch], cfg: &ClassifierTrainConfig) -> Result<(Classifier, ClassifierReport)> {
    check_balance(patches)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..patches.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((patches.len() as f64 * cfg.val_fraction).round() as usize).max(1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let val: Vec<LabeledPatch> = val_idx.iter().map(|&i| patches[i].clone()).collect();
    let mut train: Vec<usize> = train_idx.to_vec();

    let mut model = Classifier::new(cfg.seed);
    let batch = cfg.batch.max(1);
    let total_steps = (cfg.epochs * train.len().div_ceil(batch)).max(1);
    let mut step = 0usize;
    let mut best = (f64::NEG_INFINITY, model.clone(), 0usize, [0.0; 3]);
    let mut initial_loss = None;
    let mut last_loss = f64::NAN;

    for epoch in 0..cfg.epochs {
        train.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in train.chunks(batch) {
            let mut acc = None;
            for &i in chunk {
                // Degradation types are invariant under the dihedral group.
                let op = AugmentOp::all()[rng.random_range(0..8)];
                let trace = model.forward(&op.apply(&patches[i].image))?;
                let (loss, d) = bce_with_logits(trace.logits, patches[i].label);
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite classifier loss at epoch {epoch}, patch {i} (logits {:?})",
                        trace.logits
                    )));
                }
                epoch_loss += loss;
                let g = model.backward(&trace, d)?;
                match acc.as_mut() {
                    None => acc = Some(g),
                    Some(a) => crate::nn::Grads::add(a, &g),
                }
            }
            let mut g = acc.expect("non-empty chunk");
            g.scale(1.0 / chunk.len() as f32);
            let progress = step as f64 / total_steps as f64;
            let lr = cfg.final_lr + 0.5 * (cfg.lr - cfg.final_lr) * (1.0 + (std::f64::consts::PI * progress).cos());
            model.params_mut().adam_step(&g, lr)?;
            step += 1;
        }
        let mean_loss = epoch_loss / train.len() as f64;
        initial_loss.get_or_insert(mean_loss);
        last_loss = mean_loss;
        let accs = evaluate(&model, &val)?;
        let macro_acc = accs.iter().sum::<f64>() / 3.0;
        info!("classifier epoch {epoch}: loss {mean_loss:.4}, held-out accuracy {accs:?}");
        if macro_acc > best.0 {
            best = (macro_acc, model.clone(), epoch, accs);
        }
    }
    let (_, model, best_epoch, val_accuracy) = best;
    let report = ClassifierReport {
        initial_loss: initial_loss.unwrap_or(f64::NAN),
        final_loss: last_loss,
        best_epoch,
        val_accuracy,
        train_size: train.len(),
        val_size: val.len(),
    };
    Ok((model, report))
}
