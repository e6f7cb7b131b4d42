use super::pairs::PairBatch;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::nn::{charbonnier, Grads, Real, SrArch, SrModel, Stop, Tensor};

/// Feature tap of the pretrained model on a whole test image, computed once
/// and cropped per pair.
#[derive(Debug, Clone)]
pub struct ReferenceFeatures<T> {
    arch: SrArch,
    tap: Tensor<T>,
}

impl<T: Real> ReferenceFeatures<T> {
    pub fn compute(reference: &SrModel<T>, x: &Image) -> Result<Self> {
        Ok(Self { arch: reference.arch(), tap: reference.tap(x)? })
    }

    pub fn arch(&self) -> SrArch {
        self.arch
    }

    pub fn tap(&self) -> &Tensor<T> {
        &self.tap
    }

    /// The tap window under an LR crop of side `crop` at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, crop: usize) -> Result<Tensor<T>> {
        let s = self.arch.scale;
        self.tap.crop(top * s, left * s, crop * s, crop * s)
    }
}

/// The two parts of the second-order reconstruction loss, batch means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    /// Self-supervised term between the taps of `x` and `x_sd`.
    pub self_supervised: f64,
    /// Consistency term between the pretrained tap of `x` and the tap of `x_sd`.
    pub consistency: f64,
    /// `self_supervised + alpha * consistency`.
    pub total: f64,
}

/// Second-order reconstruction loss over `batch` and its gradient with
/// respect to every parameter of `model`.
///
/// Both terms are Charbonnier means over tap elements, then averaged over
/// the pairs. The pretrained side of the consistency term comes from
/// `reference` and carries no gradient.
pub fn second_order_loss<T: Real>(
    model: &SrModel<T>,
    reference: &ReferenceFeatures<T>,
    batch: &PairBatch,
    alpha: f64,
    eps: f64,
) -> Result<(LossValue, Grads<T>)> {
    if model.arch() != reference.arch {
        return Err(Error::Shape(format!(
            "model architecture {:?} differs from reference {:?}",
            model.arch(),
            reference.arch
        )));
    }
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty pair batch".into()));
    }
    let n = batch.len() as f64;
    let (mut ls, mut la) = (0.0, 0.0);
    let mut grads = Grads::zeros_like(model.params());
    for pair in &batch.pairs {
        if pair.x.dims() != pair.x_sd.dims() || pair.x.height() != pair.x.width() {
            return Err(Error::Shape(format!(
                "pair crops {:?} and {:?} must be equal squares",
                pair.x.dims(),
                pair.x_sd.dims()
            )));
        }
        let tx = model.forward(&pair.x, Stop::Tap)?;
        let tsd = model.forward(&pair.x_sd, Stop::Tap)?;
        let target = reference.crop(pair.top, pair.left, pair.x.height())?;
        let m = tx.tap.len() as f64;
        let (s_sum, gs) = charbonnier(&tx.tap.data, &tsd.tap.data, eps);
        let (a_sum, ga) = charbonnier(&tsd.tap.data, &target.data, eps);
        ls += s_sum / m;
        la += a_sum / m;
        let k = T::from_f64(1.0 / (m * n));
        let ka = T::from_f64(alpha / (m * n));
        let (c, h, w) = tx.tap.shape();
        let g_x = Tensor::from_vec(c, h, w, gs.iter().map(|&g| g * k).collect())?;
        let g_sd = Tensor::from_vec(c, h, w, gs.iter().zip(&ga).map(|(&g, &a)| a * ka - g * k).collect())?;
        grads.add(&model.backward(&tx, Some(&g_x), None)?);
        grads.add(&model.backward(&tsd, Some(&g_sd), None)?);
    }
    let (ls, la) = (ls / n, la / n);
    Ok((LossValue { self_supervised: ls, consistency: la, total: ls + alpha * la }, grads))
}
