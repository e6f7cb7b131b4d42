//! Adapts a pretrained model to one degraded test image with the
//! second-order self-supervised loss, next to the TTA-C baseline.
//!
//! `cargo run --release --example adapt_image [-- <sr checkpoint>]`
//!
//! Without a checkpoint a small model is pretrained first (about a minute).

use srtta::adapt::{adapt_image, tta_c_baseline, AdaptConfig};
use srtta::benchgen::{build_domain, procedural_corpus, DomainId};
use srtta::experiment::{train_baseline, PretrainConfig};
use srtta::imaging::{psnr, Image};
use srtta::nn::{load_sr_model, SrArch, SrModel};
use srtta::preserve::FrozenMask;
use srtta::rng;

fn reference_model() -> srtta::Result<SrModel<f32>> {
    if let Some(path) = std::env::args().nth(1) {
        return load_sr_model(path);
    }
    let corpus: Vec<Image> = procedural_corpus(120, 96, 11)?.into_iter().map(|c| c.image).collect();
    let cfg = PretrainConfig { arch: SrArch::new(2, 16, 2)?, steps: 400, lr: 2e-3, ..PretrainConfig::default() };
    Ok(train_baseline(&corpus, &cfg)?.0)
}

fn main() -> srtta::Result<()> {
    let reference = reference_model()?;
    let ds = build_domain(&procedural_corpus(3, 96, 999)?, DomainId::GaussianNoise, 2, 5)?;
    let cfg = AdaptConfig { crop: 32, batch: 8, steps: 10, lr: 5e-3, rho: 0.0, ..AdaptConfig::default() };
    for (i, e) in ds.entries.iter().enumerate() {
        let (base, _) = reference.predict(&e.lr)?;

        let mut model = reference.clone();
        FrozenMask::none(&model).install(&mut model)?;
        let mut r = rng::stream(0, &[i as u64]);
        let out = adapt_image(&mut model, &reference, &e.lr, DomainId::GaussianNoise.label(), &cfg, &mut r)?;
        let (first, last) = (&out.losses[0], &out.losses[out.losses.len() - 1]);

        let mut model = reference.clone();
        FrozenMask::none(&model).install(&mut model)?;
        let tta = tta_c_baseline(&mut model, &reference, &e.lr, &cfg)?;
        println!(
            "{}: no adaptation {:.3} dB, SRTTA {:.3} dB (total loss {:.4} -> {:.4}), TTA-C {:.3} dB",
            e.name,
            psnr(&base, &e.hr)?,
            psnr(&out.prediction, &e.hr)?,
            first.total,
            last.total,
            psnr(&tta.prediction, &e.hr)?
        );
    }
    Ok(())
}
