use super::augment::augment8;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::nn::{charbonnier, Grads, Real, SrModel, Stop, Tensor, CHARBONNIER_EPS};

/// Mean of the eight back-transformed raw predictions of `reference`.
///
/// Accumulated in `f64`, so the result does not depend on the order in
/// which the group is enumerated beyond the final rounding.
pub fn consistency_target<T: Real>(reference: &SrModel<T>, x_c: &Image) -> Result<Tensor<T>> {
    let mut sum: Vec<f64> = Vec::new();
    let mut shape = (0, 0, 0);
    for a in augment8(x_c) {
        let y = a.inverse.apply_tensor(&reference.predict_raw(&a.image)?);
        if sum.is_empty() {
            shape = y.shape();
            sum = vec![0.0; y.len()];
        }
        sum.iter_mut().zip(&y.data).for_each(|(s, v)| *s += v.to_f64());
    }
    Tensor::from_vec(shape.0, shape.1, shape.2, sum.into_iter().map(|s| T::from_f64(s / 8.0)).collect())
}

/// Mean Charbonnier distance between `model(x_c)` and a fixed `target`,
/// with gradients for every parameter of `model`.
pub fn consistency_loss_with_target<T: Real>(
    model: &SrModel<T>,
    x_c: &Image,
    target: &Tensor<T>,
) -> Result<(f64, Grads<T>)> {
    let trace = model.forward(x_c, Stop::Output)?;
    let out = trace.output.as_ref().expect("full forward");
    if out.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "consistency target {:?} vs prediction {:?}",
            target.shape(),
            out.shape()
        )));
    }
    let (sum, mut g) = charbonnier(&out.data, &target.data, CHARBONNIER_EPS);
    let n = g.len() as f64;
    let inv = T::from_f64(1.0 / n);
    g.iter_mut().for_each(|v| *v = *v * inv);
    let g = Tensor::from_vec(out.channels, out.height, out.width, g)?;
    let grads = model.backward(&trace, None, Some(&g))?;
    Ok((sum / n, grads))
}

/// Augmentation consistency loss: the target is built from `reference`
/// (the pretrained parameters) and treated as a constant.
pub fn consistency_loss<T: Real>(model: &SrModel<T>, reference: &SrModel<T>, x_c: &Image) -> Result<(f64, Grads<T>)> {
    let target = consistency_target(reference, x_c)?;
    consistency_loss_with_target(model, x_c, &target)
}
