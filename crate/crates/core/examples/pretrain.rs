//! Pretrains a small SR model on clean bicubic pairs and compares it with
//! bicubic upsampling on held-out images.
//!
//! `cargo run --release --example pretrain [-- <steps>]`

use srtta::benchgen::procedural_corpus;
use srtta::experiment::{train_baseline, PretrainConfig};
use srtta::imaging::Image;
use srtta::nn::SrArch;

fn main() -> srtta::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let corpus: Vec<Image> = procedural_corpus(120, 96, 11)?.into_iter().map(|c| c.image).collect();
    let cfg = PretrainConfig {
        arch: SrArch::new(2, 16, 2)?,
        steps,
        lr: 2e-3,
        val_images: 10,
        ..PretrainConfig::default()
    };
    let (model, report) = train_baseline(&corpus, &cfg)?;
    println!(
        "{} steps on {} images: loss {:.4} -> {:.4}",
        steps,
        report.train_images,
        report.losses.first().copied().unwrap_or(f64::NAN),
        report.losses.last().copied().unwrap_or(f64::NAN)
    );
    println!(
        "held-out: model {:.3} dB, bicubic {:.3} dB, gain {:+.3} dB",
        report.val_psnr,
        report.val_psnr_bicubic,
        report.gain_db()
    );
    srtta::nn::save_sr_model(&model, std::env::temp_dir().join("srtta_example_pretrained.bin"))?;
    Ok(())
}
