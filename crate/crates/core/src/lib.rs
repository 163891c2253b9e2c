//! Flow metering and botnet detection over packet captures.
//!
//! Classic pcap files are streamed into bidirectional flows, each summarized
//! by 65 CICFlowMeter-style statistics ([`flow`]). Flows are labeled from
//! 5-tuple ground-truth rules ([`labeling`]), ranked per dataset by
//! logistic-regression coefficient magnitude, and the features selected by
//! several datasets form a universal set ([`selection`]). Four classifiers
//! ([`classifiers`]) are then trained per dataset on that set and scored
//! ([`evaluation`]). [`pipeline`] runs all of it from one config.
//!
//! ```no_run
//! use botflow::flow::{ingest_capture, MeterConfig};
//!
//! let ex = ingest_capture("capture.pcap", &MeterConfig::default())?;
//! for f in &ex.flows {
//!     println!("{} {:.1}", f.flow_id, f[botflow::flow::Feature::FlowDuration]);
//! }
//! # Ok::<(), botflow::Error>(())
//! ```

pub mod classifiers;
pub mod dataset;
mod error;
pub mod evaluation;
pub mod flow;
pub mod labeling;
pub mod packet;
pub mod pcap;
pub mod pipeline;
pub mod scaling;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
