//! Streams a capture through the flow meter and writes the 65-feature CSV.
//!
//! cargo run --example extract_features [CAPTURE.pcap] [OUT.csv]
//! Without arguments a synthetic DDoS capture is used.

use std::path::PathBuf;

use botflow::flow::records::write_flows_file;
use botflow::flow::{ingest_capture, ingest_reader, Feature, MeterConfig};
use botflow::synth::{generate_synthetic_capture, scenario_dataset, Scenario};

fn main() -> botflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let capture = args.next();
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("botflow-flows.csv"));
    let meter = MeterConfig::default();

    let ex = match capture {
        Some(path) => ingest_capture(path, &meter)?,
        None => {
            let ds = scenario_dataset(Scenario::Ddos, 50, 50, 1);
            let bytes = generate_synthetic_capture(&ds.blueprints, 1)?;
            ingest_reader(bytes.as_slice(), &meter)?
        }
    };
    println!("{:?}", ex.stats);
    for f in ex.flows.iter().take(5) {
        println!(
            "{}  dur={}us fwd={} bwd={} pkt_len_mean={:.1}",
            f.flow_id,
            f[Feature::FlowDuration],
            f[Feature::TotalFwdPackets],
            f[Feature::TotalBwdPackets],
            f[Feature::PacketLenMean]
        );
    }
    write_flows_file(&out, &ex.flows, None)?;
    println!("{} flows -> {}", ex.flows.len(), out.display());
    Ok(())
}
