//! Ablation over the consistency weight and the freeze ratio, reusing the
//! artifacts of a previous run (see the `experiment` example).
//!
//! `cargo run --release --example ablation [-- <run dir>]`

use srtta::benchgen::DomainId;
use srtta::experiment::{ablate, CorpusSource, ExperimentConfig, ExperimentMethod};

fn main() -> srtta::Result<()> {
    let dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("srtta_example_run"));
    let mut cfg = ExperimentConfig {
        out_dir: dir,
        test_corpus: CorpusSource::Procedural { count: 6, side: 96, seed: 999 },
        domains: vec![DomainId::GaussianNoise, DomainId::Jpeg],
        methods: vec![ExperimentMethod::SrttaLifelong],
        ..ExperimentConfig::default()
    };
    cfg.ablation.alpha = vec![0.0, 1.0];
    cfg.ablation.rho = vec![0.0, 0.5];
    cfg.check_inputs()?;
    for r in ablate(&cfg)? {
        println!(
            "alpha {:<3} rho {:<3} {:<15} {:.3} dB, clean drop {:.3} dB",
            r.alpha,
            r.rho,
            r.domain,
            r.psnr_db.unwrap_or(f64::NAN),
            r.clean_drop_db.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
