//! The micro-EDSR super-resolution network: forward pass, feature tap,
//! analytic gradients and checkpoints.
//!
//! `cargo run --example sr_model`

use srtta::benchgen::procedural_image;
use srtta::nn::{load_sr_model, save_sr_model, SrArch, SrModel, Stop, Tensor};
use srtta::rng;

fn main() -> srtta::Result<()> {
    let arch = SrArch::new(2, 16, 2)?;
    let model = SrModel::<f32>::new(arch, 0)?;
    println!("{arch:?}: {} parameters, {} adaptable", model.params().scalar_count(), model.adaptable_scalar_count());

    let x = procedural_image(&mut rng::stream(1, &[]), 32, 40);
    let (y, _) = model.predict(&x)?;
    let tap = model.tap(&x)?;
    println!("input {:?} -> output {:?}, tap {:?}", x.dims(), y.dims(), tap.shape());

    // Gradient of the sum of the tap with respect to every parameter.
    let trace = model.forward(&x, Stop::Tap)?;
    let (c, h, w) = trace.tap.shape();
    let ones = Tensor::from_vec(c, h, w, vec![1.0f32; c * h * w])?;
    let grads = model.backward(&trace, Some(&ones), None)?;
    for (name, g) in grads.iter().take(4) {
        println!("d(sum tap)/d{name}: |g|_max = {:.4}", g.iter().fold(0.0f32, |m, v| m.max(v.abs())));
    }

    let path = std::env::temp_dir().join("srtta_example_model.bin");
    save_sr_model(&model, &path)?;
    let back: SrModel<f32> = load_sr_model(&path)?;
    assert!(back.params().values_equal(model.params()));
    println!("checkpoint round trip OK: {}", path.display());
    Ok(())
}
