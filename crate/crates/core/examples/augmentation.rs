//! The dihedral augmentation group and the augmentation consistency loss
//! that drives the importance scores.
//!
//! `cargo run --example augmentation`

use srtta::benchgen::procedural_image;
use srtta::nn::{SrArch, SrModel};
use srtta::preserve::{augment8, consistency_loss, AugmentOp};
use srtta::rng;

fn main() -> srtta::Result<()> {
    let x = procedural_image(&mut rng::stream(4, &[]), 24, 36);
    for a in augment8(&x) {
        assert_eq!(a.inverse.apply(&a.image), x);
        println!("{:?}: {:?} (inverse {:?})", a.op, a.image.dims(), a.inverse);
    }
    let r = AugmentOp::new(true, false, false);
    println!("rotating four times is the identity: {}", r.then(r).then(r).then(r) == AugmentOp::IDENTITY);

    let model = SrModel::<f64>::new(SrArch::new(1, 8, 2)?, 3)?;
    let (loss, grads) = consistency_loss(&model, &model, &x)?;
    let norm: f64 = grads.iter().flat_map(|(_, g)| g.iter()).map(|v| v * v).sum::<f64>().sqrt();
    println!("consistency loss of a random model: {loss:.6}, gradient norm {norm:.4e}");
    Ok(())
}
