//! Bidirectional flow assembly and per-flow statistics.
//!
//! Packets are keyed by a direction-independent 5-tuple. The first packet
//! of a flow defines its forward direction. A flow ends when it has been idle
//! for longer than [`MeterConfig::flow_timeout_us`] (checked when the next
//! packet of the same key arrives), when TCP teardown completes (FIN seen in
//! both directions then an ACK, or any RST), or at end of capture.
//!
//! Packet lengths are transport payload bytes; header bytes only feed the
//! Fwd/Bwd Header Length features. Standard deviations use the sample
//! (n - 1) divisor, and rates over a zero duration are 0.

mod accumulator;
pub mod records;
mod features;
mod key;
mod stats;
mod table;

use std::fs::File;
use std::io::{BufReader, Read};
use std::net::IpAddr;
use std::path::Path;

use ipnet::IpNet;
use log::warn;
use serde::{Deserialize, Serialize};

pub use accumulator::{Direction, FlowAccumulator};
pub use features::{compute_features, flow_id, Feature, FeatureVector, FEATURE_COUNT};
pub use key::FlowKey;
pub use stats::RunningStats;
pub use table::FlowTable;

use crate::error::{Error, Result};
use crate::packet::{decode_frame, Skip};
use crate::pcap::{NextRecord, PcapReader};

/// How often (in packets) idle flows of other keys are swept out of the table.
const SWEEP_INTERVAL: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeterConfig {
    pub flow_timeout_us: i64,
    pub activity_timeout_us: i64,
    /// Prefixes considered "inside"; a flow is Inbound when its forward
    /// destination falls in one of them.
    pub home_prefixes: Vec<IpNet>,
}

impl Default for MeterConfig {
    fn default() -> Self {
        MeterConfig {
            flow_timeout_us: 120_000_000,
            activity_timeout_us: 5_000_000,
            home_prefixes: ["10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16", "fc00::/7"]
                .iter()
                .map(|p| p.parse().unwrap())
                .collect(),
        }
    }
}

impl MeterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.activity_timeout_us <= 0 || self.flow_timeout_us <= self.activity_timeout_us {
            return Err(Error::validation(format!(
                "need flow_timeout ({}) > activity_timeout ({}) > 0",
                self.flow_timeout_us, self.activity_timeout_us
            )));
        }
        Ok(())
    }

    pub fn is_home(&self, ip: IpAddr) -> bool {
        self.home_prefixes.iter().any(|net| net.contains(&ip))
    }
}

/// Packet accounting for one capture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub frames: u64,
    /// Frames that became flow packets.
    pub packets: u64,
    pub skipped_non_ip: u64,
    pub skipped_protocol: u64,
    pub skipped_fragments: u64,
    pub truncated: u64,
    pub flows: u64,
}

impl IngestStats {
    pub fn skipped(&self) -> u64 {
        self.skipped_non_ip + self.skipped_protocol + self.skipped_fragments + self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub flows: Vec<FeatureVector>,
    pub stats: IngestStats,
}

pub fn ingest_capture(path: impl AsRef<Path>, config: &MeterConfig) -> Result<Extraction> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::with_capacity(1 << 20, file), config)
}

/// Streams a classic pcap and returns one feature vector per finalized flow,
/// in finalization order.
pub fn ingest_reader<R: Read>(reader: R, config: &MeterConfig) -> Result<Extraction> {
    config.validate()?;
    let mut pcap = PcapReader::new(reader)?;
    let linktype = pcap.header().linktype;
    let mut table = FlowTable::new(config.clone());
    let mut stats = IngestStats::default();
    let mut flows = Vec::new();

    loop {
        let record = match pcap.next_record()? {
            NextRecord::Record(r) => r,
            NextRecord::Truncated => {
                stats.frames += 1;
                stats.truncated += 1;
                continue;
            }
            NextRecord::End => break,
        };
        stats.frames += 1;
        let pkt = match decode_frame(linktype, record.timestamp_us, &record.data) {
            Ok(p) => p,
            Err(Skip::NonIp) | Err(Skip::UnsupportedLinkType(_)) => {
                stats.skipped_non_ip += 1;
                continue;
            }
            Err(Skip::UnsupportedProtocol(_)) => {
                stats.skipped_protocol += 1;
                continue;
            }
            Err(Skip::Fragment) => {
                stats.skipped_fragments += 1;
                continue;
            }
            Err(Skip::Truncated) => {
                stats.truncated += 1;
                continue;
            }
        };
        stats.packets += 1;
        for done in table.offer_packet(&pkt) {
            flows.push(compute_features(&done, config));
        }
        if stats.packets % SWEEP_INTERVAL == 0 {
            for done in table.expire_idle(pkt.timestamp_us) {
                flows.push(compute_features(&done, config));
            }
        }
    }
    for done in table.flush() {
        flows.push(compute_features(&done, config));
    }
    if stats.truncated > 0 {
        warn!("{} truncated or undecodable records skipped", stats.truncated);
    }
    stats.flows = flows.len() as u64;
    Ok(Extraction { flows, stats })
}
