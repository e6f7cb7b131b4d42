use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::CHARBONNIER_EPS;

/// Whether parameters return to the pretrained values at domain boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptMode {
    ParameterReset,
    Lifelong,
}

/// Hyperparameters of the per-image adaptation loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    /// Weight of the adaptation consistency term.
    pub alpha: f64,
    /// Charbonnier smoothing constant.
    pub eps: f64,
    /// Optimizer steps per test image.
    pub steps: usize,
    /// Pairs per step.
    pub batch: usize,
    pub lr: f64,
    /// Fraction of adaptable scalars frozen before the stream starts.
    pub rho: f64,
    /// Side of the square crops, in test-image (LR) pixels.
    pub crop: usize,
    pub scale: usize,
    pub mode: AdaptMode,
    /// When set, the stochastic-restoration baseline resets this fraction
    /// of adaptable scalars after every step.
    pub restore_rate: Option<f64>,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            eps: CHARBONNIER_EPS,
            steps: 10,
            batch: 32,
            lr: 5e-5,
            rho: 0.5,
            crop: 96,
            scale: 2,
            mode: AdaptMode::ParameterReset,
            restore_rate: None,
        }
    }
}

impl AdaptConfig {
    /// Paper defaults for a given scale: 96-pixel crops at x2, 64 at x4.
    pub fn for_scale(scale: usize) -> Self {
        Self {
            crop: if scale == 4 { 64 } else { 96 },
            scale,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        self.validate_loop()
    }

    /// Everything in [`validate`](Self::validate) except the step count, so
    /// a zero-step loop can be forced.
    pub(crate) fn validate_loop(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be a finite value >= 0, got {}", self.alpha));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be finite and >= 0, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if self.crop == 0 {
            return bad("crop must be positive".into());
        }
        if self.scale != 2 && self.scale != 4 {
            return bad(format!("scale must be 2 or 4, got {}", self.scale));
        }
        if let Some(r) = self.restore_rate {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("restore rate must lie in [0, 1], got {r}"));
            }
        }
        Ok(())
    }

    /// The crop must fit inside every test image.
    pub fn check_image(&self, height: usize, width: usize) -> Result<()> {
        if self.crop > height.min(width) {
            return Err(Error::TooSmall(format!(
                "crop {} exceeds test image {height}x{width}",
                self.crop
            )));
        }
        Ok(())
    }
}
