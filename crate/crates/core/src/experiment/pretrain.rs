use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, psnr, Image, Scale};
use crate::nn::{charbonnier, Grads, SrArch, SrModel, Stop, Tensor, CHARBONNIER_EPS};
use crate::preserve::AugmentOp;

/// Smallest corpus accepted for pretraining.
pub const MIN_PRETRAIN_IMAGES: usize = 100;

/// Schedule for fitting the SR model to clean bicubic pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub arch: SrArch,
    pub steps: usize,
    pub batch: usize,
    /// Initial learning rate, halved at 50% and again at 75% of the steps.
    pub lr: f64,
    /// Side of the LR training crops.
    pub patch: usize,
    /// Images held out (taken from the end of the corpus) for validation.
    pub val_images: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            arch: SrArch::default(),
            steps: 20_000,
            batch: 16,
            lr: 1e-4,
            patch: 24,
            val_images: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub train_images: usize,
    pub val_images: usize,
    /// Mean training loss per step.
    pub losses: Vec<f64>,
    /// Mean held-out PSNR of the trained model.
    pub val_psnr: f64,
    /// Mean held-out PSNR of plain bicubic upsampling.
    pub val_psnr_bicubic: f64,
}

impl PretrainReport {
    pub fn gain_db(&self) -> f64 {
        self.val_psnr - self.val_psnr_bicubic
    }
}

/// Bicubic-downsampled, 8-bit-quantized LR version of `hr`.
pub fn clean_lr(hr: &Image, scale: usize) -> Result<Image> {
    Ok(bicubic_resize(hr, Scale::down(scale as u32))?.quantize_u8())
}

fn lr_rate(cfg: &PretrainConfig, step: usize) -> f64 {
    let halvings = usize::from(2 * step >= cfg.steps) + usize::from(4 * step >= 3 * cfg.steps);
    cfg.lr / f64::from(1u32 << halvings)
}

/// Mean PSNR of `model` and of bicubic upsampling over clean `(lr, hr)` pairs.
pub fn evaluate_clean(model: &SrModel<f32>, pairs: &[(Image, Image)]) -> Result<(f64, f64)> {
    let (mut m, mut b) = (0.0, 0.0);
    for (lr, hr) in pairs {
        m += psnr(&model.predict(lr)?.0, hr)?;
        b += psnr(&bicubic_resize(lr, Scale::up(model.scale() as u32))?.clamp_unit(), hr)?;
    }
    let n = pairs.len().max(1) as f64;
    Ok((m / n, b / n))
}

/// Trains a fresh SR model with Adam on random dihedrally augmented crops of
/// `(bicubic LR, HR)` pairs under a mean Charbonnier loss on the output.
pub fn train_baseline(corpus: &[Image], cfg: &PretrainConfig) -> Result<(SrModel<f32>, PretrainReport)> {
    if corpus.len() < MIN_PRETRAIN_IMAGES {
        return Err(Error::InvalidArgument(format!(
            "pretraining needs at least {MIN_PRETRAIN_IMAGES} images, got {}",
            corpus.len()
        )));
    }
    if cfg.val_images >= corpus.len() || cfg.batch == 0 || cfg.patch == 0 {
        return Err(Error::Config("pretraining needs a positive batch and patch and a training split".into()));
    }
    let s = cfg.arch.scale;
    let pairs: Vec<(Image, Image)> = corpus
        .iter()
        .map(|img| {
            let hr = img.crop(0, 0, img.height() / s * s, img.width() / s * s)?;
            Ok((clean_lr(&hr, s)?, hr))
        })
        .collect::<Result<_>>()?;
    let (train, val) = pairs.split_at(pairs.len() - cfg.val_images);
    if let Some((lr, _)) = train.iter().find(|(lr, _)| lr.height().min(lr.width()) < cfg.patch) {
        return Err(Error::TooSmall(format!("{:?} LR image for {} patches", lr.dims(), cfg.patch)));
    }

    let mut model = SrModel::<f32>::new(cfg.arch, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let p = cfg.patch;
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut grads = Grads::zeros_like(model.params());
        let mut loss = 0.0;
        for _ in 0..cfg.batch {
            let (lr, hr) = &train[rng.random_range(0..train.len())];
            let top = rng.random_range(0..=lr.height() - p);
            let left = rng.random_range(0..=lr.width() - p);
            let op = AugmentOp::all()[rng.random_range(0..8)];
            let x = op.apply(&lr.crop(top, left, p, p)?);
            let y = op.apply(&hr.crop(top * s, left * s, p * s, p * s)?);
            let trace = model.forward(&x, Stop::Output)?;
            let out = trace.output.as_ref().expect("full forward");
            let target = Tensor::<f32>::from_image(&y);
            let (sum, g) = charbonnier(&out.data, &target.data, CHARBONNIER_EPS);
            let k = 1.0 / (g.len() * cfg.batch) as f32;
            loss += sum / g.len() as f64;
            let g = Tensor::from_vec(out.channels, out.height, out.width, g.into_iter().map(|v| v * k).collect())?;
            grads.add(&model.backward(&trace, None, Some(&g))?);
        }
        let loss = loss / cfg.batch as f64;
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::Diverged(format!("pretraining loss {loss} at step {step}")));
        }
        model.params_mut().adam_step(&grads, lr_rate(cfg, step))?;
        losses.push(loss);
        if (step + 1) % 500 == 0 {
            info!("pretrain step {}: loss {loss:.5}", step + 1);
        }
    }
    let (val_psnr, val_psnr_bicubic) = evaluate_clean(&model, val)?;
    info!("pretrain held-out PSNR {val_psnr:.3} dB (bicubic {val_psnr_bicubic:.3} dB)");
    // Optimizer state is not part of the pretrained model.
    let snapshot = model.params().clone();
    model.params_mut().restore_from(&snapshot)?;
    Ok((
        model,
        PretrainReport {
            train_images: train.len(),
            val_images: val.len(),
            losses,
            val_psnr,
            val_psnr_bicubic,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::procedural_corpus;

    fn corpus(n: usize) -> Vec<Image> {
        procedural_corpus(n, 96, 1).unwrap().into_iter().map(|c| c.image).collect()
    }

    #[test]
    fn learning_rate_halves_twice() {
        let cfg = PretrainConfig { steps: 100, ..Default::default() };
        assert_eq!(lr_rate(&cfg, 0), 1e-4);
        assert_eq!(lr_rate(&cfg, 50), 5e-5);
        assert_eq!(lr_rate(&cfg, 99), 2.5e-5);
    }

    #[test]
    fn one_step_is_deterministic_and_small_corpora_fail() {
        let cfg = PretrainConfig {
            arch: SrArch::new(1, 4, 2).unwrap(),
            steps: 1,
            batch: 2,
            patch: 8,
            val_images: 2,
            ..Default::default()
        };
        let images = corpus(MIN_PRETRAIN_IMAGES);
        let (a, ra) = train_baseline(&images, &cfg).unwrap();
        let (b, _) = train_baseline(&images, &cfg).unwrap();
        assert!(a.params().values_equal(b.params()));
        assert_eq!(ra.losses.len(), 1);
        assert!(train_baseline(&images[..10], &cfg).is_err());
    }
}
