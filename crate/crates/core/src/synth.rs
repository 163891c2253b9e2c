//! Deterministic synthetic captures built from flow blueprints.
//!
//! A blueprint lists the packets of one conversation (direction, payload
//! size, gap since the previous packet, TCP flags). Packets of all
//! blueprints are merged by absolute timestamp, ties broken by blueprint
//! index then packet index, and written as Ethernet-framed classic pcap. The
//! seed only drives bytes that do not affect flow features (IP ids, TCP
//! sequence numbers, unspecified windows, payload contents).

use std::net::IpAddr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::labeling::LabelRule;
use crate::packet::{TcpFlags, PROTO_ICMP, PROTO_ICMPV6, PROTO_TCP, PROTO_UDP};
use crate::pcap::{PcapWriter, LINKTYPE_ETHERNET};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    /// From `client` to `server`.
    Fwd,
    Bwd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketBlueprint {
    pub dir: Dir,
    pub payload_len: u32,
    /// Microseconds since the previous packet of this blueprint (or since
    /// `start_us` for the first packet).
    pub gap_us: i64,
    pub flags: TcpFlags,
    /// TCP only; `None` lets the seed pick a window.
    pub window: Option<u16>,
}

impl PacketBlueprint {
    pub fn new(dir: Dir, payload_len: u32, gap_us: i64) -> Self {
        PacketBlueprint {
            dir,
            payload_len,
            gap_us,
            flags: TcpFlags::empty(),
            window: None,
        }
    }

    pub fn flags(mut self, flags: TcpFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn window(mut self, window: u16) -> Self {
        self.window = Some(window);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowBlueprint {
    pub client: (IpAddr, u16),
    pub server: (IpAddr, u16),
    pub protocol: u8,
    pub start_us: i64,
    pub packets: Vec<PacketBlueprint>,
}

impl FlowBlueprint {
    fn validate(&self, idx: usize) -> Result<()> {
        if self.packets.is_empty() {
            return Err(Error::validation(format!("blueprint {idx} has no packets")));
        }
        if !matches!(self.protocol, PROTO_TCP | PROTO_UDP | PROTO_ICMP | PROTO_ICMPV6) {
            return Err(Error::validation(format!(
                "blueprint {idx}: unsupported protocol {}",
                self.protocol
            )));
        }
        if self.client.0.is_ipv4() != self.server.0.is_ipv4() {
            return Err(Error::validation(format!(
                "blueprint {idx}: mixed address families"
            )));
        }
        for (j, p) in self.packets.iter().enumerate() {
            if p.payload_len > 60_000 {
                return Err(Error::validation(format!(
                    "blueprint {idx} packet {j}: payload too large"
                )));
            }
            if p.gap_us < 0 {
                return Err(Error::validation(format!(
                    "blueprint {idx} packet {j}: negative gap"
                )));
            }
            if self.protocol != PROTO_TCP && (p.flags.bits() != 0 || p.window.is_some()) {
                return Err(Error::validation(format!(
                    "blueprint {idx} packet {j}: TCP fields on a non-TCP flow"
                )));
            }
        }
        Ok(())
    }
}

/// One packet of the merged timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimelineEntry {
    pub timestamp_us: i64,
    pub flow: usize,
    pub packet: usize,
}

/// Absolute timestamps of every blueprint packet, in capture order.
pub fn timeline(blueprints: &[FlowBlueprint]) -> Vec<TimelineEntry> {
    let mut out = Vec::new();
    for (fi, bp) in blueprints.iter().enumerate() {
        let mut ts = bp.start_us;
        for (pi, p) in bp.packets.iter().enumerate() {
            ts += p.gap_us;
            out.push(TimelineEntry {
                timestamp_us: ts,
                flow: fi,
                packet: pi,
            });
        }
    }
    out.sort_by_key(|e| (e.timestamp_us, e.flow, e.packet));
    out
}

pub fn generate_synthetic_capture(blueprints: &[FlowBlueprint], seed: u64) -> Result<Vec<u8>> {
    for (i, bp) in blueprints.iter().enumerate() {
        bp.validate(i)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut writer = PcapWriter::new(Vec::new(), LINKTYPE_ETHERNET)?;
    let mut frame = Vec::with_capacity(2048);
    for entry in timeline(blueprints) {
        let bp = &blueprints[entry.flow];
        let p = &bp.packets[entry.packet];
        let (src, dst) = match p.dir {
            Dir::Fwd => (bp.client, bp.server),
            Dir::Bwd => (bp.server, bp.client),
        };
        frame.clear();
        build_frame(&mut frame, src, dst, bp.protocol, p, &mut rng);
        writer.write_record(entry.timestamp_us, &frame)?;
    }
    Ok(writer.into_inner())
}

fn build_frame(
    out: &mut Vec<u8>,
    src: (IpAddr, u16),
    dst: (IpAddr, u16),
    protocol: u8,
    p: &PacketBlueprint,
    rng: &mut ChaCha8Rng,
) {
    let mut l4 = Vec::with_capacity(20 + p.payload_len as usize);
    match protocol {
        PROTO_TCP => {
            l4.extend_from_slice(&src.1.to_be_bytes());
            l4.extend_from_slice(&dst.1.to_be_bytes());
            l4.extend_from_slice(&rng.gen::<u32>().to_be_bytes());
            l4.extend_from_slice(&rng.gen::<u32>().to_be_bytes());
            l4.push(5 << 4);
            l4.push(p.flags.bits());
            let window = p.window.unwrap_or_else(|| rng.gen_range(1024..=65535));
            l4.extend_from_slice(&window.to_be_bytes());
            l4.extend_from_slice(&[0, 0, 0, 0]);
        }
        PROTO_UDP => {
            l4.extend_from_slice(&src.1.to_be_bytes());
            l4.extend_from_slice(&dst.1.to_be_bytes());
            l4.extend_from_slice(&((8 + p.payload_len) as u16).to_be_bytes());
            l4.extend_from_slice(&[0, 0]);
        }
        _ => {
            // echo request
            l4.push(if protocol == PROTO_ICMP { 8 } else { 128 });
            l4.extend_from_slice(&[0, 0, 0]);
            l4.extend_from_slice(&rng.gen::<u32>().to_be_bytes());
        }
    }
    let payload_start = l4.len();
    l4.resize(payload_start + p.payload_len as usize, 0);
    rng.fill(&mut l4[payload_start..]);

    out.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01]);
    match (src.0, dst.0) {
        (IpAddr::V4(s), IpAddr::V4(d)) => {
            out.extend_from_slice(&[0x08, 0x00]);
            let total = (20 + l4.len()) as u16;
            let mut ip = [0u8; 20];
            ip[0] = 0x45;
            ip[2..4].copy_from_slice(&total.to_be_bytes());
            ip[4..6].copy_from_slice(&rng.gen::<u16>().to_be_bytes());
            ip[6] = 0x40;
            ip[8] = 64;
            ip[9] = protocol;
            ip[12..16].copy_from_slice(&s.octets());
            ip[16..20].copy_from_slice(&d.octets());
            let csum = ipv4_checksum(&ip);
            ip[10..12].copy_from_slice(&csum.to_be_bytes());
            out.extend_from_slice(&ip);
        }
        (IpAddr::V6(s), IpAddr::V6(d)) => {
            out.extend_from_slice(&[0x86, 0xdd]);
            let mut ip = [0u8; 40];
            ip[0] = 0x60;
            ip[4..6].copy_from_slice(&(l4.len() as u16).to_be_bytes());
            ip[6] = protocol;
            ip[7] = 64;
            ip[8..24].copy_from_slice(&s.octets());
            ip[24..40].copy_from_slice(&d.octets());
            out.extend_from_slice(&ip);
        }
        _ => unreachable!("validated"),
    }
    out.extend_from_slice(&l4);
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
        .sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Traffic mixes used to build labeled desk-scale datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// HTTP flood against one web server.
    Ddos,
    /// Periodic command-and-control beacons.
    Botnet,
    /// Telnet scanning from infected IoT devices.
    Mirai,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Ddos, Scenario::Botnet, Scenario::Mirai];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Ddos => "ddos",
            Scenario::Botnet => "botnet",
            Scenario::Mirai => "mirai",
        }
    }

    pub fn attack_label(self) -> &'static str {
        match self {
            Scenario::Ddos => "DDoS",
            Scenario::Botnet => "Botnet",
            Scenario::Mirai => "Mirai",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|x| x.name() == s)
    }
}

/// A generated capture plus the ground-truth rules that label it.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub blueprints: Vec<FlowBlueprint>,
    pub rules: Vec<LabelRule>,
}

const ACK: TcpFlags = TcpFlags::ACK;

fn tcp_session(
    rng: &mut ChaCha8Rng,
    requests: usize,
    req_len: (u32, u32),
    resp_len: (u32, u32),
    think_us: (i64, i64),
    close_with_rst: bool,
) -> Vec<PacketBlueprint> {
    let rtt = rng.gen_range(2_000..40_000);
    let mut v = vec![
        PacketBlueprint::new(Dir::Fwd, 0, 0).flags(TcpFlags::SYN).window(64240),
        PacketBlueprint::new(Dir::Bwd, 0, rtt / 2)
            .flags(TcpFlags::SYN | ACK)
            .window(65160),
        PacketBlueprint::new(Dir::Fwd, 0, rtt / 2).flags(ACK),
    ];
    for _ in 0..requests {
        v.push(
            PacketBlueprint::new(
                Dir::Fwd,
                rng.gen_range(req_len.0..=req_len.1),
                rng.gen_range(think_us.0..=think_us.1),
            )
            .flags(TcpFlags::PSH | ACK),
        );
        v.push(
            PacketBlueprint::new(Dir::Bwd, rng.gen_range(resp_len.0..=resp_len.1), rtt / 2)
                .flags(TcpFlags::PSH | ACK),
        );
    }
    if close_with_rst {
        v.push(PacketBlueprint::new(Dir::Fwd, 0, rng.gen_range(100..2_000)).flags(TcpFlags::RST));
    } else {
        v.push(PacketBlueprint::new(Dir::Fwd, 0, rtt).flags(TcpFlags::FIN | ACK));
        v.push(PacketBlueprint::new(Dir::Bwd, 0, rtt / 2).flags(TcpFlags::FIN | ACK));
        v.push(PacketBlueprint::new(Dir::Fwd, 0, rtt / 2).flags(ACK));
    }
    v
}

fn v4(a: u8, b: u8, c: u8, d: u8) -> IpAddr {
    IpAddr::from([a, b, c, d])
}

fn normal_web(rng: &mut ChaCha8Rng, host: IpAddr, start_us: i64) -> FlowBlueprint {
    let requests = rng.gen_range(1..6);
    FlowBlueprint {
        client: (host, rng.gen_range(32768..61000)),
        server: (v4(93, 184, rng.gen_range(1..250), rng.gen_range(1..250)), 443),
        protocol: PROTO_TCP,
        start_us,
        packets: tcp_session(rng, requests, (200, 700), (600, 1460), (10_000, 800_000), false),
    }
}

fn normal_dns(rng: &mut ChaCha8Rng, host: IpAddr, start_us: i64) -> FlowBlueprint {
    let reply_gap = rng.gen_range(5_000..60_000);
    FlowBlueprint {
        client: (host, rng.gen_range(32768..61000)),
        server: (v4(8, 8, 8, 8), 53),
        protocol: PROTO_UDP,
        start_us,
        packets: vec![
            PacketBlueprint::new(Dir::Fwd, rng.gen_range(28..60), 0),
            PacketBlueprint::new(Dir::Bwd, rng.gen_range(60..300), reply_gap),
        ],
    }
}

/// Builds a labeled dataset of `normal` benign flows and `attack` malicious flows.
pub fn scenario_dataset(scenario: Scenario, normal: usize, attack: usize, seed: u64) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (scenario as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let base_us = 1_600_000_000_000_000i64;
    let span_us = 600_000_000i64;
    let mut blueprints = Vec::with_capacity(normal + attack);
    let mut rules = Vec::new();
    let label = scenario.attack_label();

    for _ in 0..normal {
        let host = v4(192, 168, 1, rng.gen_range(10..60));
        let start = base_us + rng.gen_range(0..span_us);
        let bp = if rng.gen_bool(0.7) {
            normal_web(&mut rng, host, start)
        } else {
            normal_dns(&mut rng, host, start)
        };
        blueprints.push(bp);
    }

    match scenario {
        Scenario::Ddos => {
            let victim = (v4(192, 168, 10, 50), 80);
            let attackers: Vec<IpAddr> = (1..=4).map(|i| v4(172, 16, 0, i)).collect();
            for a in &attackers {
                rules.push(LabelRule::source(*a, label));
            }
            for _ in 0..attack {
                let a = attackers[rng.gen_range(0..attackers.len())];
                let requests = rng.gen_range(1..4);
                let rst = rng.gen_bool(0.5);
                let mut packets = tcp_session(&mut rng, requests, (0, 20), (0, 0), (50, 3_000), rst);
                // server never answers the flood requests with content
                for p in packets.iter_mut().filter(|p| p.dir == Dir::Bwd && p.payload_len == 0) {
                    p.window = Some(0);
                }
                blueprints.push(FlowBlueprint {
                    client: (a, rng.gen_range(1024..65535)),
                    server: victim,
                    protocol: PROTO_TCP,
                    start_us: base_us + rng.gen_range(0..span_us),
                    packets,
                });
            }
        }
        Scenario::Botnet => {
            let cnc = v4(147, 32, 84, 200);
            let bots: Vec<IpAddr> = (0..3).map(|i| v4(147, 32, 84, 165 + i)).collect();
            for _ in 0..attack {
                let bot = bots[rng.gen_range(0..bots.len())];
                let client = (bot, rng.gen_range(1024..65535));
                let beacons = rng.gen_range(3..8);
                let mut packets = Vec::new();
                for i in 0..beacons {
                    let gap = if i == 0 { 0 } else { rng.gen_range(8_000_000..20_000_000) };
                    packets.push(PacketBlueprint::new(Dir::Fwd, rng.gen_range(20..48), gap));
                    if rng.gen_bool(0.5) {
                        packets.push(PacketBlueprint::new(Dir::Bwd, rng.gen_range(8..16), rng.gen_range(50_000..200_000)));
                    }
                }
                // exact 5-tuple ground truth, as the provider lists each channel
                rules.push(LabelRule::exact(client, (cnc, 6667), PROTO_UDP, label));
                blueprints.push(FlowBlueprint {
                    client,
                    server: (cnc, 6667),
                    protocol: PROTO_UDP,
                    start_us: base_us + rng.gen_range(0..span_us),
                    packets,
                });
            }
        }
        Scenario::Mirai => {
            let infected: Vec<IpAddr> = (0..5).map(|i| v4(192, 168, 100, 100 + i)).collect();
            for h in &infected {
                rules.push(LabelRule::source(*h, label));
            }
            for _ in 0..attack {
                let h = infected[rng.gen_range(0..infected.len())];
                let target = v4(rng.gen_range(1..223), rng.gen(), rng.gen(), rng.gen_range(1..255));
                let port = if rng.gen_bool(0.8) { 23 } else { 2323 };
                let mut packets = vec![PacketBlueprint::new(Dir::Fwd, 0, 0).flags(TcpFlags::SYN).window(14600)];
                if rng.gen_bool(0.6) {
                    packets.push(
                        PacketBlueprint::new(Dir::Bwd, 0, rng.gen_range(20_000..200_000))
                            .flags(TcpFlags::RST | ACK)
                            .window(0),
                    );
                } else {
                    packets.push(PacketBlueprint::new(Dir::Fwd, 0, 3_000_000).flags(TcpFlags::SYN).window(14600));
                }
                blueprints.push(FlowBlueprint {
                    client: (h, rng.gen_range(1024..65535)),
                    server: (target, port),
                    protocol: PROTO_TCP,
                    start_us: base_us + rng.gen_range(0..span_us),
                    packets,
                });
            }
        }
    }
    SyntheticDataset { blueprints, rules }
}
