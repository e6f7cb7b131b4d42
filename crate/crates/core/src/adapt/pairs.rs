use rand::Rng;

use super::config::AdaptConfig;
use crate::degrade::{second_order_degrade, DegradationLabel, DegradationSpec};
use crate::error::{Error, Result};
use crate::imaging::Image;

/// One pseudo pair: a crop of the test image and its second-order degraded
/// copy, both taken at the same window.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    /// Crop origin in test-image pixels.
    pub top: usize,
    pub left: usize,
    pub x: Image,
    pub x_sd: Image,
    pub spec: DegradationSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub pairs: Vec<Pair>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Samples `cfg.batch` uniform crop windows of `x` and degrades each one
/// independently with fresh parameters of exactly the types in `label`.
pub fn construct_pairs<R: Rng + ?Sized>(
    x: &Image,
    label: DegradationLabel,
    cfg: &AdaptConfig,
    rng: &mut R,
) -> Result<PairBatch> {
    if label.is_clean() {
        return Err(Error::CleanLabel);
    }
    if cfg.batch == 0 || cfg.crop == 0 {
        return Err(Error::Config("pair construction needs a positive batch and crop".into()));
    }
    cfg.check_image(x.height(), x.width())?;
    let pairs = (0..cfg.batch)
        .map(|_| {
            let top = rng.random_range(0..=x.height() - cfg.crop);
            let left = rng.random_range(0..=x.width() - cfg.crop);
            let crop = x.crop(top, left, cfg.crop, cfg.crop)?;
            let (x_sd, spec) = second_order_degrade(&crop, label, rng)?;
            Ok(Pair { top, left, x: crop, x_sd, spec })
        })
        .collect::<Result<_>>()?;
    Ok(PairBatch { pairs })
}
