//! Synthesizes three scenario captures and runs every stage over them.
//!
//! cargo run --release --example full_pipeline [OUT_DIR]

use std::path::PathBuf;

use botflow::pipeline::{run_pipeline, write_synthetic_corpus, PipelineConfig};
use botflow::synth::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("botflow-run"));
    let manifests = write_synthetic_corpus(&root.join("corpus"), &Scenario::ALL, 300, 300, 7)?;
    let cfg = PipelineConfig::new(root.join("out"), manifests, 7);
    let outcome = run_pipeline(&cfg)?;

    for list in &outcome.rankings {
        println!("{}: {}", list.dataset, list.names().join(", "));
    }
    println!("universal: {}", outcome.universal.names().join(", "));
    for r in &outcome.reports {
        println!("{:<7} {:<4} acc {:6.2}  f1 {:6.2}", r.dataset, r.classifier, r.accuracy, r.f1);
    }
    println!("artifacts in {}", cfg.out_dir.display());
    Ok(())
}
