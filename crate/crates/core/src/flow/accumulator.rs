use std::net::IpAddr;

use super::key::FlowKey;
use super::stats::RunningStats;
use crate::packet::{PacketRecord, TcpFlags, PROTO_TCP};

/// Flag counter slots, in feature order.
pub(crate) const FLAG_ORDER: [TcpFlags; 8] = [
    TcpFlags::FIN,
    TcpFlags::SYN,
    TcpFlags::RST,
    TcpFlags::PSH,
    TcpFlags::ACK,
    TcpFlags::URG,
    TcpFlags::CWR,
    TcpFlags::ECE,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// In-progress state of one bidirectional flow.
#[derive(Debug, Clone)]
pub struct FlowAccumulator {
    pub key: FlowKey,
    /// Source endpoint of the first packet; defines the forward direction.
    pub fwd_src: (IpAddr, u16),
    pub fwd_dst: (IpAddr, u16),
    /// Creation order within a flow table.
    pub seq: u64,
    pub first_ts_us: i64,
    pub last_ts_us: i64,
    last_arrival_us: i64,
    last_fwd_us: Option<i64>,
    last_bwd_us: Option<i64>,

    pub fwd_len: RunningStats,
    pub bwd_len: RunningStats,
    pub all_len: RunningStats,
    pub flow_iat: RunningStats,
    pub fwd_iat: RunningStats,
    pub bwd_iat: RunningStats,

    pub fwd_header_bytes: u64,
    pub bwd_header_bytes: u64,
    /// Packets carrying each flag, indexed like [`FLAG_ORDER`].
    pub flag_counts: [u64; 8],
    pub fwd_psh: u64,
    pub bwd_psh: u64,
    pub fwd_urg: u64,
    pub bwd_urg: u64,
    pub init_fwd_win: i64,
    pub init_bwd_win: i64,

    pub active: RunningStats,
    pub idle: RunningStats,
    active_start_us: i64,
    active_end_us: i64,

    pub fwd_fins: u32,
    pub bwd_fins: u32,
    pub rst_seen: bool,
    terminated: bool,
}

impl FlowAccumulator {
    pub fn start(pkt: &PacketRecord, seq: u64) -> Self {
        let mut flow = FlowAccumulator {
            key: FlowKey::of(pkt),
            fwd_src: (pkt.src_ip, pkt.src_port),
            fwd_dst: (pkt.dst_ip, pkt.dst_port),
            seq,
            first_ts_us: pkt.timestamp_us,
            last_ts_us: pkt.timestamp_us,
            last_arrival_us: pkt.timestamp_us,
            last_fwd_us: None,
            last_bwd_us: None,
            fwd_len: RunningStats::new(),
            bwd_len: RunningStats::new(),
            all_len: RunningStats::new(),
            flow_iat: RunningStats::new(),
            fwd_iat: RunningStats::new(),
            bwd_iat: RunningStats::new(),
            fwd_header_bytes: 0,
            bwd_header_bytes: 0,
            flag_counts: [0; 8],
            fwd_psh: 0,
            bwd_psh: 0,
            fwd_urg: 0,
            bwd_urg: 0,
            init_fwd_win: -1,
            init_bwd_win: -1,
            active: RunningStats::new(),
            idle: RunningStats::new(),
            active_start_us: pkt.timestamp_us,
            active_end_us: pkt.timestamp_us,
            fwd_fins: 0,
            bwd_fins: 0,
            rst_seen: false,
            terminated: false,
        };
        flow.record(pkt, true);
        flow
    }

    pub fn direction_of(&self, pkt: &PacketRecord) -> Direction {
        if (pkt.src_ip, pkt.src_port) == self.fwd_src {
            Direction::Forward
        } else {
            Direction::Backward
        }
    }

    pub fn total_packets(&self) -> u64 {
        self.fwd_len.count() + self.bwd_len.count()
    }

    /// True once the flow saw an RST, or a final ACK after FINs in both directions.
    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// Adds a packet of the same key. Returns true when it ends the flow.
    pub fn add(&mut self, pkt: &PacketRecord, activity_timeout_us: i64) -> bool {
        let ts = pkt.timestamp_us;
        self.flow_iat.push((ts - self.last_arrival_us) as f64);
        self.last_arrival_us = ts;
        self.first_ts_us = self.first_ts_us.min(ts);
        self.last_ts_us = self.last_ts_us.max(ts);

        let gap = ts - self.active_end_us;
        if gap > activity_timeout_us {
            let active_len = self.active_end_us - self.active_start_us;
            if active_len > 0 {
                self.active.push(active_len as f64);
            }
            self.idle.push(gap as f64);
            self.active_start_us = ts;
        }
        self.active_end_us = ts;

        self.record(pkt, false);
        self.terminated
    }

    fn record(&mut self, pkt: &PacketRecord, first: bool) {
        let ts = pkt.timestamp_us;
        let len = pkt.payload_len as f64;
        let flags = pkt.tcp_flags;
        let dir = self.direction_of(pkt);
        self.all_len.push(len);
        match dir {
            Direction::Forward => {
                self.fwd_len.push(len);
                if let Some(prev) = self.last_fwd_us {
                    self.fwd_iat.push((ts - prev) as f64);
                }
                self.last_fwd_us = Some(ts);
                self.fwd_header_bytes += pkt.header_len as u64;
                self.fwd_psh += flags.contains(TcpFlags::PSH) as u64;
                self.fwd_urg += flags.contains(TcpFlags::URG) as u64;
                if self.init_fwd_win < 0 {
                    if let Some(w) = pkt.tcp_window {
                        self.init_fwd_win = w as i64;
                    }
                }
            }
            Direction::Backward => {
                self.bwd_len.push(len);
                if let Some(prev) = self.last_bwd_us {
                    self.bwd_iat.push((ts - prev) as f64);
                }
                self.last_bwd_us = Some(ts);
                self.bwd_header_bytes += pkt.header_len as u64;
                self.bwd_psh += flags.contains(TcpFlags::PSH) as u64;
                self.bwd_urg += flags.contains(TcpFlags::URG) as u64;
                if self.init_bwd_win < 0 {
                    if let Some(w) = pkt.tcp_window {
                        self.init_bwd_win = w as i64;
                    }
                }
            }
        }
        for (slot, flag) in FLAG_ORDER.iter().enumerate() {
            self.flag_counts[slot] += flags.contains(*flag) as u64;
        }

        if pkt.protocol != PROTO_TCP {
            return;
        }
        let both_fins_before = self.fwd_fins > 0 && self.bwd_fins > 0;
        if flags.contains(TcpFlags::RST) {
            self.rst_seen = true;
            self.terminated = true;
        } else if !first && both_fins_before && flags.contains(TcpFlags::ACK) {
            self.terminated = true;
        }
        if flags.contains(TcpFlags::FIN) {
            match dir {
                Direction::Forward => self.fwd_fins += 1,
                Direction::Backward => self.bwd_fins += 1,
            }
        }
    }

    /// Closes the trailing active period. Call once, before computing features.
    pub fn finish(&mut self) {
        let active_len = self.active_end_us - self.active_start_us;
        if active_len > 0 {
            self.active.push(active_len as f64);
        }
        self.active_start_us = self.active_end_us;
    }
}
