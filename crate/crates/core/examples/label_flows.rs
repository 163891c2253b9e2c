//! Joins extracted flows to 5-tuple ground-truth rules.

use botflow::flow::{ingest_reader, MeterConfig};
use botflow::labeling::{label_flows, RuleSet};
use botflow::synth::{generate_synthetic_capture, scenario_dataset, Scenario};

fn main() -> botflow::Result<()> {
    let ds = scenario_dataset(Scenario::Botnet, 60, 60, 3);
    let bytes = generate_synthetic_capture(&ds.blueprints, 3)?;
    let flows = ingest_reader(bytes.as_slice(), &MeterConfig::default())?.flows;

    let rules = RuleSet::new(ds.rules);
    let (rows, report) = label_flows(&flows, &rules, "Normal");
    println!(
        "exact {}, reversed {}, wildcard {}, unmatched {}",
        report.exact, report.reversed, report.wildcard, report.unmatched
    );
    for (label, n) in &report.per_label {
        println!("{label:>8}: {n}");
    }
    let first_attack = rows.iter().find(|r| r.label != "Normal");
    if let Some(r) = first_attack {
        println!("e.g. {} -> {}", r.features.flow_id, r.label);
    }
    Ok(())
}
