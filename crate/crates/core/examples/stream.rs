//! Drives a stream of test images from several domains through SRTTA in
//! parameter-reset and lifelong mode, with importance-based freezing, and
//! checks that frozen parameters never move.
//!
//! `cargo run --release --example stream [-- <sr checkpoint>]`
//!
//! Without a checkpoint a small model is pretrained first.

use srtta::adapt::{run_stream, AdaptConfig, AdaptMode, Method, StreamItem};
use srtta::benchgen::{build_domain, procedural_corpus, DomainId};
use srtta::classifier::FixedLabel;
use srtta::experiment::{clean_lr, train_baseline, PretrainConfig};
use srtta::imaging::Image;
use srtta::nn::{load_sr_model, SrArch, SrModel};
use srtta::preserve::{fisher_scores, select_frozen};

fn main() -> srtta::Result<()> {
    let reference: SrModel<f32> = match std::env::args().nth(1) {
        Some(path) => load_sr_model(path)?,
        None => {
            let corpus: Vec<Image> = procedural_corpus(120, 96, 11)?.into_iter().map(|c| c.image).collect();
            let cfg = PretrainConfig { arch: SrArch::new(2, 16, 2)?, steps: 400, lr: 2e-3, ..PretrainConfig::default() };
            train_baseline(&corpus, &cfg)?.0
        }
    };
    let corpus = procedural_corpus(4, 96, 999)?;
    let mut items = Vec::new();
    for domain in [DomainId::GaussianNoise, DomainId::Jpeg] {
        for e in build_domain(&corpus, domain, 2, 1)?.entries {
            items.push(StreamItem { name: e.name, domain: domain.name().into(), lr: e.lr, hr: Some(e.hr) });
        }
    }
    let clean: Vec<Image> =
        procedural_corpus(4, 96, 4242)?.iter().map(|c| clean_lr(&c.image, 2)).collect::<srtta::Result<_>>()?;
    let mask = select_frozen(&fisher_scores(&reference, &clean)?, 0.5)?;

    // Oracle labels keep the example independent of a trained classifier.
    let labels = FixedLabel(srtta::degrade::DegradationLabel::new(false, true, true));
    for mode in [AdaptMode::ParameterReset, AdaptMode::Lifelong] {
        let cfg = AdaptConfig { crop: 32, batch: 4, steps: 5, lr: 1e-2, mode, ..AdaptConfig::default() };
        let mut model = reference.clone();
        mask.install(&mut model)?;
        let out = run_stream(&mut model, &reference, &items, &labels, &cfg, Method::Srtta, 0)?;
        for c in out.report.domain_means() {
            println!("{:<16} {:<16} {:.3} dB over {} images", c.method, c.domain, c.psnr_db.unwrap_or(f64::NAN), c.images);
        }
        assert!(mask.frozen_values_equal(model.params(), reference.params()));
    }
    println!("frozen scalars unchanged after both streams");
    Ok(())
}
