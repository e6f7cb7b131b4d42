//! The whole pipeline from a config: pretrain, classifier, benchmark and a
//! method comparison with forgetting measurements, written to disk.
//!
//! `cargo run --release --example experiment [-- <out dir>]`
//!
//! The config is shrunk so the run takes a few minutes; the `srtta` binary
//! runs the full desk config.

use srtta::benchgen::DomainId;
use srtta::experiment::{
    benchgen, pretrain, run_experiment, train_degradation_classifier, CorpusSource, ExperimentConfig, ExperimentMethod,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("srtta_example_run"));
    let mut cfg = ExperimentConfig {
        out_dir: out,
        test_corpus: CorpusSource::Procedural { count: 6, side: 96, seed: 999 },
        domains: vec![DomainId::GaussianNoise, DomainId::Jpeg],
        methods: ExperimentMethod::ALL.to_vec(),
        ..ExperimentConfig::default()
    };
    cfg.pretrain.steps = 300;
    cfg.patches.per_class = 120;
    cfg.classifier_train.epochs = 5;

    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("config.json"), serde_json::to_vec_pretty(&cfg)?)?;

    let p = pretrain(&cfg)?;
    println!("pretrained: {:+.3} dB over bicubic", p.gain_db());
    let c = train_degradation_classifier(&cfg)?;
    println!("classifier held-out accuracy {:?}", c.val_accuracy);
    benchgen(&cfg)?;
    let outcome = run_experiment(&cfg)?;
    for cell in &outcome.summary.cells {
        println!("{:<15} {:<15} {:.3} dB  SSIM {:.4}", cell.domain, cell.method, cell.psnr_db.unwrap_or(f64::NAN), cell.ssim.unwrap_or(f64::NAN));
    }
    for f in &outcome.summary.forgetting {
        println!("{} after {}: clean PSNR drop {:.3} dB", f.method, f.after_domain, f.drop_db);
    }
    println!("metrics.csv, timing.csv and summary.json in {}", cfg.out_dir.display());
    Ok(())
}
