use rand::Rng;

use super::config::AdaptConfig;
use super::loss::{second_order_loss, LossValue, ReferenceFeatures};
use super::pairs::construct_pairs;
use crate::degrade::DegradationLabel;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::nn::{Real, SrModel};
use crate::preserve::{consistency_loss_with_target, consistency_target, stochastic_restore};

/// Result of adapting on one test image.
#[derive(Debug, Clone)]
pub struct Adapted {
    pub prediction: Image,
    /// Loss before each optimizer step.
    pub losses: Vec<LossValue>,
    /// Scalars reset by stochastic restoration, summed over the steps.
    pub restored: usize,
}

fn check_models<T: Real>(model: &SrModel<T>, reference: &SrModel<T>) -> Result<()> {
    if model.arch() != reference.arch() {
        return Err(Error::Shape(format!(
            "model architecture {:?} differs from reference {:?}",
            model.arch(),
            reference.arch()
        )));
    }
    Ok(())
}

/// True when no adaptable scalar can move, so every step would be a no-op.
fn fully_frozen<T: Real>(model: &SrModel<T>) -> bool {
    model
        .params()
        .iter()
        .filter(|(n, _)| SrModel::<T>::is_adaptable(n))
        .all(|(_, p)| p.frozen.iter().all(|&f| f))
}

fn restore_after_step<T: Real, R: Rng + ?Sized>(
    model: &mut SrModel<T>,
    reference: &SrModel<T>,
    cfg: &AdaptConfig,
    rng: &mut R,
) -> Result<usize> {
    match cfg.restore_rate {
        Some(rate) => stochastic_restore(model.params_mut(), reference.params(), rate, rng),
        None => Ok(0),
    }
}

/// Adapts `model` on test image `x` with `cfg.steps` steps of the
/// second-order reconstruction loss and super-resolves `x` with the result.
///
/// Images labeled clean are super-resolved by `reference` and leave `model`
/// untouched. The caller installs the frozen mask beforehand.
pub fn adapt_image<T: Real, R: Rng + ?Sized>(
    model: &mut SrModel<T>,
    reference: &SrModel<T>,
    x: &Image,
    label: DegradationLabel,
    cfg: &AdaptConfig,
    rng: &mut R,
) -> Result<Adapted> {
    cfg.validate_loop()?;
    check_models(model, reference)?;
    if label.is_clean() {
        let (prediction, _) = reference.predict(x)?;
        return Ok(Adapted { prediction, losses: Vec::new(), restored: 0 });
    }
    cfg.check_image(x.height(), x.width())?;
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut restored = 0;
    if cfg.steps > 0 && !(fully_frozen(model) && cfg.restore_rate.is_none()) {
        let features = ReferenceFeatures::compute(reference, x)?;
        for _ in 0..cfg.steps {
            let batch = construct_pairs(x, label, cfg, rng)?;
            let (loss, grads) = second_order_loss(model, &features, &batch, cfg.alpha, cfg.eps)?;
            if !loss.total.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged(format!("adaptation loss {}", loss.total)));
            }
            losses.push(loss);
            model.params_mut().adam_step(&grads, cfg.lr)?;
            restored += restore_after_step(model, reference, cfg, rng)?;
        }
    }
    let (prediction, _) = model.predict(x)?;
    Ok(Adapted { prediction, losses, restored })
}

/// Comparison baseline: the same loop, but each step minimizes the
/// augmentation consistency loss of the whole test image against the
/// pretrained model's eight-view mean. Uses no classifier and no pairs.
pub fn tta_c_baseline<T: Real>(model: &mut SrModel<T>, reference: &SrModel<T>, x: &Image, cfg: &AdaptConfig) -> Result<Adapted> {
    cfg.validate_loop()?;
    check_models(model, reference)?;
    let mut losses = Vec::with_capacity(cfg.steps);
    if cfg.steps > 0 && !fully_frozen(model) {
        let target = consistency_target(reference, x)?;
        for _ in 0..cfg.steps {
            let (loss, grads) = consistency_loss_with_target(model, x, &target)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged(format!("consistency loss {loss}")));
            }
            losses.push(LossValue { self_supervised: 0.0, consistency: loss, total: loss });
            model.params_mut().adam_step(&grads, cfg.lr)?;
        }
    }
    let (prediction, _) = model.predict(x)?;
    Ok(Adapted { prediction, losses, restored: 0 })
}
