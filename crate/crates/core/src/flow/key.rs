use std::fmt;
use std::net::IpAddr;

use crate::packet::PacketRecord;

/// Direction-independent 5-tuple: `(ip_a, port_a) <= (ip_b, port_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub ip_a: IpAddr,
    pub port_a: u16,
    pub ip_b: IpAddr,
    pub port_b: u16,
    pub protocol: u8,
}

impl FlowKey {
    pub fn new(src: (IpAddr, u16), dst: (IpAddr, u16), protocol: u8) -> Self {
        let (a, b) = if src <= dst { (src, dst) } else { (dst, src) };
        FlowKey {
            ip_a: a.0,
            port_a: a.1,
            ip_b: b.0,
            port_b: b.1,
            protocol,
        }
    }

    pub fn of(pkt: &PacketRecord) -> Self {
        FlowKey::new(
            (pkt.src_ip, pkt.src_port),
            (pkt.dst_ip, pkt.dst_port),
            pkt.protocol,
        )
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{} <-> {}:{} proto {}",
            self.ip_a, self.port_a, self.ip_b, self.port_b, self.protocol
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::TcpFlags;

    #[test]
    fn packet_and_reply_share_a_key() {
        let p = PacketRecord {
            timestamp_us: 0,
            src_ip: "192.168.1.9".parse().unwrap(),
            dst_ip: "10.0.0.1".parse().unwrap(),
            src_port: 50000,
            dst_port: 443,
            protocol: 6,
            payload_len: 0,
            header_len: 40,
            tcp_flags: TcpFlags::SYN,
            tcp_window: Some(1),
        };
        assert_eq!(FlowKey::of(&p), FlowKey::of(&p.reversed()));
        let k = FlowKey::of(&p);
        assert!((k.ip_a, k.port_a) <= (k.ip_b, k.port_b));
    }
}
