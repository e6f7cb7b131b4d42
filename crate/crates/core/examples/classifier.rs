//! The degradation classifier: synthesizes labeled LR patches with the
//! benchmark recipes, trains briefly and predicts multi-label types.
//!
//! `cargo run --release --example classifier [-- <patches per class> <epochs>]`

use srtta::benchgen::{build_domain, procedural_corpus, DomainId};
use srtta::classifier::{evaluate, synthesize_training_patches, train_classifier, ClassifierTrainConfig, PatchConfig};
use srtta::rng;

fn main() -> srtta::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let per_class = args.next().flatten().unwrap_or(100);
    let epochs = args.next().flatten().unwrap_or(4);

    let corpus = procedural_corpus(60, 96, 1)?;
    let cfg = PatchConfig { per_class, ..PatchConfig::default() };
    let patches = synthesize_training_patches(&corpus, &cfg, &mut rng::stream(2, &[]))?;
    let (model, report) = train_classifier(&patches, &ClassifierTrainConfig { epochs, ..Default::default() })?;
    println!("trained on {} patches; held-out accuracy {:?}", report.train_size, report.val_accuracy);

    let fresh = synthesize_training_patches(&procedural_corpus(20, 96, 77)?, &PatchConfig { per_class: 25, ..cfg }, &mut rng::stream(3, &[]))?;
    println!("fresh-corpus accuracy (blur, noise, jpeg) {:?}", evaluate(&model, &fresh)?);

    let test = procedural_corpus(3, 96, 5)?;
    for domain in [DomainId::Clean, DomainId::GaussianBlur, DomainId::GaussianNoise, DomainId::Jpeg, DomainId::NoiseJpeg] {
        let ds = build_domain(&test, domain, 2, 9)?;
        let preds: Vec<String> = ds.entries.iter().map(|e| model.predict(&e.lr).map(|l| l.to_string())).collect::<srtta::Result<_>>()?;
        println!("{:<15} truth {:<12} predicted {preds:?}", domain.name(), domain.label().to_string());
    }
    Ok(())
}
