//! Builds corrupted test domains from a corpus and writes them as PNG files
//! with JSON manifests that replay bit-exactly.
//!
//! `cargo run --example benchmark [-- <png dir>]`

use srtta::benchgen::{build_domain, load_png_corpus, procedural_corpus, DomainDataset, DomainId};

fn main() -> srtta::Result<()> {
    let corpus = match std::env::args().nth(1) {
        Some(dir) => load_png_corpus(dir)?,
        None => procedural_corpus(6, 96, 999)?,
    };
    let root = std::env::temp_dir().join("srtta_example_bench");
    for domain in DomainId::benchmark() {
        let ds = build_domain(&corpus, domain, 2, 42)?;
        ds.write(&root)?;
        let e = &ds.entries[0];
        println!("{:<16} {} images, first: {} ({})", domain.name(), ds.entries.len(), e.name, e.spec.order.join(" -> "));
        let back = DomainDataset::load(&root, domain)?;
        assert_eq!(back.entries[0].spec.replay(&back.entries[0].hr)?, back.entries[0].lr);
    }
    println!("written under {}", root.display());
    Ok(())
}
