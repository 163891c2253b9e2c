//! The canonical 65-feature flow record.

use std::fmt;
use std::net::IpAddr;
use std::ops::Index;

use super::accumulator::FlowAccumulator;
use super::MeterConfig;

macro_rules! feature_set {
    ($($variant:ident => $name:literal,)*) => {
        /// One model feature of a flow. Names are the long-form CICFlowMeter headers.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Feature {
            $($variant,)*
        }

        impl Feature {
            pub const ALL: &'static [Feature] = &[$(Feature::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Feature::$variant => $name,)*
                }
            }
        }
    };
}

feature_set! {
    FlowDuration => "Flow Duration",
    TotalFwdPackets => "Total Fwd Packets",
    TotalBwdPackets => "Total Backward Packets",
    TotalLenFwd => "Total Length of Fwd Packets",
    TotalLenBwd => "Total Length of Bwd Packets",
    FwdLenMax => "Fwd Packet Length Max",
    FwdLenMin => "Fwd Packet Length Min",
    FwdLenMean => "Fwd Packet Length Mean",
    FwdLenStd => "Fwd Packet Length Std",
    BwdLenMax => "Bwd Packet Length Max",
    BwdLenMin => "Bwd Packet Length Min",
    BwdLenMean => "Bwd Packet Length Mean",
    BwdLenStd => "Bwd Packet Length Std",
    FlowBytesPerSec => "Flow Bytes/s",
    FlowPacketsPerSec => "Flow Packets/s",
    FlowIatMean => "Flow IAT Mean",
    FlowIatStd => "Flow IAT Std",
    FlowIatMax => "Flow IAT Max",
    FlowIatMin => "Flow IAT Min",
    FwdIatTotal => "Fwd IAT Total",
    FwdIatMean => "Fwd IAT Mean",
    FwdIatStd => "Fwd IAT Std",
    FwdIatMax => "Fwd IAT Max",
    FwdIatMin => "Fwd IAT Min",
    BwdIatTotal => "Bwd IAT Total",
    BwdIatMean => "Bwd IAT Mean",
    BwdIatStd => "Bwd IAT Std",
    BwdIatMax => "Bwd IAT Max",
    BwdIatMin => "Bwd IAT Min",
    FwdPshFlags => "Fwd PSH Flags",
    BwdPshFlags => "Bwd PSH Flags",
    FwdUrgFlags => "Fwd URG Flags",
    BwdUrgFlags => "Bwd URG Flags",
    FwdHeaderLen => "Fwd Header Length",
    BwdHeaderLen => "Bwd Header Length",
    FwdPacketsPerSec => "Fwd Packets/s",
    BwdPacketsPerSec => "Bwd Packets/s",
    MinPacketLen => "Min Packet Length",
    MaxPacketLen => "Max Packet Length",
    PacketLenMean => "Packet Length Mean",
    PacketLenStd => "Packet Length Std",
    PacketLenVariance => "Packet Length Variance",
    FinFlagCount => "FIN Flag Count",
    SynFlagCount => "SYN Flag Count",
    RstFlagCount => "RST Flag Count",
    PshFlagCount => "PSH Flag Count",
    AckFlagCount => "ACK Flag Count",
    UrgFlagCount => "URG Flag Count",
    CwrFlagCount => "CWR Flag Count",
    EceFlagCount => "ECE Flag Count",
    DownUpRatio => "Down/Up Ratio",
    AvgPacketSize => "Average Packet Size",
    AvgFwdSegmentSize => "Avg Fwd Segment Size",
    AvgBwdSegmentSize => "Avg Bwd Segment Size",
    InitFwdWinBytes => "Init Fwd Win Bytes",
    InitBwdWinBytes => "Init Bwd Win Bytes",
    ActiveMean => "Active Mean",
    ActiveStd => "Active Std",
    ActiveMax => "Active Max",
    ActiveMin => "Active Min",
    IdleMean => "Idle Mean",
    IdleStd => "Idle Std",
    IdleMax => "Idle Max",
    IdleMin => "Idle Min",
    Inbound => "Inbound",
}

pub const FEATURE_COUNT: usize = 65;
const _: () = assert!(Feature::ALL.len() == FEATURE_COUNT);

impl Feature {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.iter().copied().find(|f| f.name() == name)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A finalized flow: identity of its forward direction plus the model features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub flow_id: String,
    pub src_ip: IpAddr,
    pub src_port: u16,
    pub dst_ip: IpAddr,
    pub dst_port: u16,
    pub protocol: u8,
    pub timestamp_us: i64,
    pub values: [f64; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn get(&self, feature: Feature) -> f64 {
        self.values[feature.index()]
    }
}

impl Index<Feature> for FeatureVector {
    type Output = f64;
    fn index(&self, feature: Feature) -> &f64 {
        &self.values[feature.index()]
    }
}

pub fn flow_id(src: (IpAddr, u16), dst: (IpAddr, u16), protocol: u8) -> String {
    format!("{}-{}-{}-{}-{}", src.0, dst.0, src.1, dst.1, protocol)
}

fn per_second(count: f64, duration_us: f64) -> f64 {
    if duration_us > 0.0 {
        count * 1e6 / duration_us
    } else {
        0.0
    }
}

/// Computes the feature vector of a finished flow.
pub fn compute_features(flow: &FlowAccumulator, config: &MeterConfig) -> FeatureVector {
    use Feature::*;

    let mut v = [0.0; FEATURE_COUNT];
    let mut set = |f: Feature, x: f64| v[f.index()] = x;

    let duration = (flow.last_ts_us - flow.first_ts_us) as f64;
    let fwd_n = flow.fwd_len.count() as f64;
    let bwd_n = flow.bwd_len.count() as f64;
    let total_n = fwd_n + bwd_n;
    let total_bytes = flow.all_len.sum();

    set(FlowDuration, duration);
    set(TotalFwdPackets, fwd_n);
    set(TotalBwdPackets, bwd_n);
    set(TotalLenFwd, flow.fwd_len.sum());
    set(TotalLenBwd, flow.bwd_len.sum());
    set(FwdLenMax, flow.fwd_len.max());
    set(FwdLenMin, flow.fwd_len.min());
    set(FwdLenMean, flow.fwd_len.mean());
    set(FwdLenStd, flow.fwd_len.std());
    set(BwdLenMax, flow.bwd_len.max());
    set(BwdLenMin, flow.bwd_len.min());
    set(BwdLenMean, flow.bwd_len.mean());
    set(BwdLenStd, flow.bwd_len.std());
    set(FlowBytesPerSec, per_second(total_bytes, duration));
    set(FlowPacketsPerSec, per_second(total_n, duration));
    set(FlowIatMean, flow.flow_iat.mean());
    set(FlowIatStd, flow.flow_iat.std());
    set(FlowIatMax, flow.flow_iat.max());
    set(FlowIatMin, flow.flow_iat.min());
    set(FwdIatTotal, flow.fwd_iat.sum());
    set(FwdIatMean, flow.fwd_iat.mean());
    set(FwdIatStd, flow.fwd_iat.std());
    set(FwdIatMax, flow.fwd_iat.max());
    set(FwdIatMin, flow.fwd_iat.min());
    set(BwdIatTotal, flow.bwd_iat.sum());
    set(BwdIatMean, flow.bwd_iat.mean());
    set(BwdIatStd, flow.bwd_iat.std());
    set(BwdIatMax, flow.bwd_iat.max());
    set(BwdIatMin, flow.bwd_iat.min());
    set(FwdPshFlags, flow.fwd_psh as f64);
    set(BwdPshFlags, flow.bwd_psh as f64);
    set(FwdUrgFlags, flow.fwd_urg as f64);
    set(BwdUrgFlags, flow.bwd_urg as f64);
    set(FwdHeaderLen, flow.fwd_header_bytes as f64);
    set(BwdHeaderLen, flow.bwd_header_bytes as f64);
    set(FwdPacketsPerSec, per_second(fwd_n, duration));
    set(BwdPacketsPerSec, per_second(bwd_n, duration));
    set(MinPacketLen, flow.all_len.min());
    set(MaxPacketLen, flow.all_len.max());
    set(PacketLenMean, flow.all_len.mean());
    let std = flow.all_len.std();
    set(PacketLenStd, std);
    set(PacketLenVariance, std * std);
    let flag_features = [
        FinFlagCount,
        SynFlagCount,
        RstFlagCount,
        PshFlagCount,
        AckFlagCount,
        UrgFlagCount,
        CwrFlagCount,
        EceFlagCount,
    ];
    for (f, count) in flag_features.into_iter().zip(flow.flag_counts) {
        set(f, count as f64);
    }
    set(DownUpRatio, if fwd_n > 0.0 { bwd_n / fwd_n } else { 0.0 });
    set(
        AvgPacketSize,
        if total_n > 0.0 { total_bytes / total_n } else { 0.0 },
    );
    set(AvgFwdSegmentSize, flow.fwd_len.mean());
    set(AvgBwdSegmentSize, flow.bwd_len.mean());
    set(InitFwdWinBytes, flow.init_fwd_win as f64);
    set(InitBwdWinBytes, flow.init_bwd_win as f64);
    set(ActiveMean, flow.active.mean());
    set(ActiveStd, flow.active.std());
    set(ActiveMax, flow.active.max());
    set(ActiveMin, flow.active.min());
    set(IdleMean, flow.idle.mean());
    set(IdleStd, flow.idle.std());
    set(IdleMax, flow.idle.max());
    set(IdleMin, flow.idle.min());
    set(
        Inbound,
        if config.is_home(flow.fwd_dst.0) { 1.0 } else { 0.0 },
    );

    FeatureVector {
        flow_id: flow_id(flow.fwd_src, flow.fwd_dst, flow.key.protocol),
        src_ip: flow.fwd_src.0,
        src_port: flow.fwd_src.1,
        dst_ip: flow.fwd_dst.0,
        dst_port: flow.fwd_dst.1,
        protocol: flow.key.protocol,
        timestamp_us: flow.first_ts_us,
        values: v,
    }
}
