//! Writes a synthetic Mirai-style capture plus its ground-truth rules.
//!
//! cargo run --example synth_capture [OUT_DIR]

use std::fs;
use std::path::PathBuf;

use botflow::labeling::write_rules;
use botflow::synth::{generate_synthetic_capture, scenario_dataset, Scenario};

fn main() -> botflow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("botflow-synth"));
    fs::create_dir_all(&out)?;
    let ds = scenario_dataset(Scenario::Mirai, 100, 100, 42);
    let pcap = generate_synthetic_capture(&ds.blueprints, 42)?;
    fs::write(out.join("mirai.pcap"), &pcap)?;
    let mut rules = Vec::new();
    write_rules(&mut rules, &ds.rules)?;
    fs::write(out.join("mirai.rules.csv"), rules)?;
    println!("{} flows, {} bytes of pcap, {} rules in {}", ds.blueprints.len(), pcap.len(), ds.rules.len(), out.display());
    Ok(())
}
