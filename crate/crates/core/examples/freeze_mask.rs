//! Importance scores over clean images, top-ratio freezing, the random
//! selection baseline and the mask file format.
//!
//! `cargo run --release --example freeze_mask [-- <sr checkpoint>]`

use srtta::benchgen::procedural_corpus;
use srtta::experiment::clean_lr;
use srtta::imaging::Image;
use srtta::nn::{load_sr_model, SrArch, SrModel};
use srtta::preserve::{fisher_scores, random_frozen, select_frozen, FrozenMask};
use srtta::rng;

fn main() -> srtta::Result<()> {
    let model: SrModel<f32> = match std::env::args().nth(1) {
        Some(path) => load_sr_model(path)?,
        None => SrModel::new(SrArch::new(2, 16, 2)?, 0)?,
    };
    let clean: Vec<Image> = procedural_corpus(4, 96, 4242)?
        .iter()
        .map(|c| clean_lr(&c.image, model.scale()))
        .collect::<srtta::Result<_>>()?;
    let scores = fisher_scores(&model, &clean)?;
    println!("{} adaptable scalars scored over {} clean images", scores.scalar_count(), scores.clean_count());
    for rho in [0.1, 0.5, 0.9] {
        let mask = select_frozen(&scores, rho)?;
        println!("rho {rho}: freeze {} scalars, threshold {:.3e}", mask.frozen_count(), scores.threshold(rho)?);
    }

    let fisher = select_frozen(&scores, 0.5)?;
    let random = random_frozen(&model, 0.5, &mut rng::stream(1, &[rng::tag("random-mask")]))?;
    let overlap: usize = fisher
        .masks()
        .iter()
        .map(|(n, m)| m.iter().zip(random.get(n).unwrap()).filter(|(a, b)| **a && **b).count())
        .sum();
    println!("fisher and random masks share {overlap} of {} frozen scalars", fisher.frozen_count());

    let path = std::env::temp_dir().join("srtta_example_mask.bin");
    fisher.save(&path)?;
    assert_eq!(FrozenMask::load(&path)?, fisher);
    let mut m = model.clone();
    fisher.install(&mut m)?;
    println!("installed: {} of {} parameters frozen in total", m.params().frozen_count(), m.params().scalar_count());
    Ok(())
}
