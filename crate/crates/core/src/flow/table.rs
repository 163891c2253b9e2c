use std::collections::hash_map::Entry;
use std::collections::HashMap;

use super::accumulator::FlowAccumulator;
use super::key::FlowKey;
use super::MeterConfig;
use crate::packet::PacketRecord;

/// Live flows of one capture stream. Single writer.
#[derive(Debug)]
pub struct FlowTable {
    config: MeterConfig,
    flows: HashMap<FlowKey, FlowAccumulator>,
    next_seq: u64,
}

impl FlowTable {
    pub fn new(config: MeterConfig) -> Self {
        FlowTable {
            config,
            flows: HashMap::new(),
            next_seq: 0,
        }
    }

    pub fn config(&self) -> &MeterConfig {
        &self.config
    }

    pub fn live_flows(&self) -> usize {
        self.flows.len()
    }

    /// Attributes `pkt` to its flow and returns any flows it finalized.
    ///
    /// A live flow idle for longer than the flow timeout is emitted first and
    /// `pkt` starts a fresh flow; a flow terminated by this packet is emitted
    /// with the packet included.
    pub fn offer_packet(&mut self, pkt: &PacketRecord) -> Vec<FlowAccumulator> {
        let key = FlowKey::of(pkt);
        let mut done = Vec::new();
        if let Some(flow) = self.flows.get(&key) {
            if pkt.timestamp_us - flow.last_ts_us > self.config.flow_timeout_us {
                let mut expired = self.flows.remove(&key).unwrap();
                expired.finish();
                done.push(expired);
            }
        }
        match self.flows.entry(key) {
            Entry::Occupied(mut e) => {
                if e.get_mut().add(pkt, self.config.activity_timeout_us) {
                    let mut flow = e.remove();
                    flow.finish();
                    done.push(flow);
                }
            }
            Entry::Vacant(e) => {
                let flow = FlowAccumulator::start(pkt, self.next_seq);
                self.next_seq += 1;
                if flow.is_terminated() {
                    let mut flow = flow;
                    flow.finish();
                    done.push(flow);
                } else {
                    e.insert(flow);
                }
            }
        }
        done
    }

    /// Finalizes every flow idle for longer than the flow timeout at `now_us`,
    /// in creation order. Bounds memory on long captures.
    pub fn expire_idle(&mut self, now_us: i64) -> Vec<FlowAccumulator> {
        let timeout = self.config.flow_timeout_us;
        let stale: Vec<FlowKey> = self
            .flows
            .iter()
            .filter(|(_, f)| now_us - f.last_ts_us > timeout)
            .map(|(k, _)| *k)
            .collect();
        let mut out: Vec<FlowAccumulator> = stale
            .into_iter()
            .filter_map(|k| self.flows.remove(&k))
            .collect();
        out.sort_by_key(|f| f.seq);
        for f in &mut out {
            f.finish();
        }
        out
    }

    /// Finalizes all remaining flows in creation order.
    pub fn flush(&mut self) -> Vec<FlowAccumulator> {
        let mut out: Vec<FlowAccumulator> = self.flows.drain().map(|(_, f)| f).collect();
        out.sort_by_key(|f| f.seq);
        for f in &mut out {
            f.finish();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{TcpFlags, PROTO_TCP, PROTO_UDP};
    use std::net::IpAddr;

    fn pkt(ts: i64, from_a: bool, proto: u8, flags: TcpFlags) -> PacketRecord {
        let a: IpAddr = "10.0.0.1".parse().unwrap();
        let b: IpAddr = "10.0.0.2".parse().unwrap();
        let (src_ip, dst_ip, src_port, dst_port) = if from_a {
            (a, b, 1000, 80)
        } else {
            (b, a, 80, 1000)
        };
        PacketRecord {
            timestamp_us: ts,
            src_ip,
            dst_ip,
            src_port,
            dst_port,
            protocol: proto,
            payload_len: 10,
            header_len: if proto == PROTO_TCP { 40 } else { 28 },
            tcp_flags: flags,
            tcp_window: (proto == PROTO_TCP).then_some(1024),
        }
    }

    #[test]
    fn idle_timeout_splits_flow() {
        let mut t = FlowTable::new(MeterConfig::default());
        assert!(t
            .offer_packet(&pkt(0, true, PROTO_UDP, TcpFlags::empty()))
            .is_empty());
        let out = t.offer_packet(&pkt(150_000_000, true, PROTO_UDP, TcpFlags::empty()));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].total_packets(), 1);
        assert_eq!(t.live_flows(), 1);
        let rest = t.flush();
        assert_eq!(rest[0].first_ts_us, 150_000_000);
    }

    #[test]
    fn tcp_close_handshake_finalizes_at_last_ack() {
        let ack = TcpFlags::ACK;
        let seq = [
            (true, TcpFlags::SYN),
            (false, TcpFlags::SYN | ack),
            (true, ack),
            (true, TcpFlags::FIN | ack),
            (false, TcpFlags::FIN | ack),
            (true, ack),
        ];
        let mut t = FlowTable::new(MeterConfig::default());
        for (i, (dir, flags)) in seq.iter().enumerate() {
            let out = t.offer_packet(&pkt(i as i64 * 1000, *dir, PROTO_TCP, *flags));
            if i < 5 {
                assert!(out.is_empty(), "finalized early at packet {i}");
            } else {
                assert_eq!(out.len(), 1);
                assert_eq!(out[0].total_packets(), 6);
                assert_eq!(out[0].fwd_len.count(), 4);
            }
        }
        assert_eq!(t.live_flows(), 0);
    }

    #[test]
    fn rst_finalizes_immediately() {
        let mut t = FlowTable::new(MeterConfig::default());
        t.offer_packet(&pkt(0, true, PROTO_TCP, TcpFlags::SYN));
        let out = t.offer_packet(&pkt(5, false, PROTO_TCP, TcpFlags::RST | TcpFlags::ACK));
        assert_eq!(out.len(), 1);
        assert!(out[0].rst_seen);
    }

    #[test]
    fn reply_lands_in_same_flow_backward() {
        let mut t = FlowTable::new(MeterConfig::default());
        t.offer_packet(&pkt(0, true, PROTO_UDP, TcpFlags::empty()));
        t.offer_packet(&pkt(10, false, PROTO_UDP, TcpFlags::empty()));
        let flows = t.flush();
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].fwd_len.count(), 1);
        assert_eq!(flows[0].bwd_len.count(), 1);
        assert_eq!(flows[0].fwd_src.1, 1000);
    }

    #[test]
    fn expire_idle_only_takes_stale_flows() {
        let mut t = FlowTable::new(MeterConfig::default());
        t.offer_packet(&pkt(0, true, PROTO_UDP, TcpFlags::empty()));
        let mut other = pkt(100_000_000, true, PROTO_UDP, TcpFlags::empty());
        other.src_port = 2000;
        t.offer_packet(&other);
        let out = t.expire_idle(130_000_000);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].fwd_src.1, 1000);
        assert_eq!(t.live_flows(), 1);
    }
}
