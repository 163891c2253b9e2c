//! Link, network and transport header decoding into [`PacketRecord`]s.

use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use crate::pcap;

pub const PROTO_ICMP: u8 = 1;
pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;
pub const PROTO_ICMPV6: u8 = 58;

/// TCP control bits as carried in byte 13 of the TCP header.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TcpFlags(pub u8);

impl TcpFlags {
    pub const FIN: TcpFlags = TcpFlags(0x01);
    pub const SYN: TcpFlags = TcpFlags(0x02);
    pub const RST: TcpFlags = TcpFlags(0x04);
    pub const PSH: TcpFlags = TcpFlags(0x08);
    pub const ACK: TcpFlags = TcpFlags(0x10);
    pub const URG: TcpFlags = TcpFlags(0x20);
    pub const ECE: TcpFlags = TcpFlags(0x40);
    pub const CWR: TcpFlags = TcpFlags(0x80);

    pub const fn empty() -> Self {
        TcpFlags(0)
    }

    pub fn contains(self, other: TcpFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

impl std::ops::BitOr for TcpFlags {
    type Output = TcpFlags;
    fn bitor(self, rhs: Self) -> Self {
        TcpFlags(self.0 | rhs.0)
    }
}

impl fmt::Debug for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 8] = ["FIN", "SYN", "RST", "PSH", "ACK", "URG", "ECE", "CWR"];
        let set: Vec<&str> = (0..8)
            .filter(|i| self.0 & (1 << i) != 0)
            .map(|i| NAMES[i])
            .collect();
        write!(f, "TcpFlags({})", set.join("|"))
    }
}

/// The per-packet facts the flow meter consumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    pub timestamp_us: i64,
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    /// 0 for protocols without ports.
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
    /// Transport payload bytes.
    pub payload_len: u32,
    /// IP header (including IPv6 extension headers) plus transport header bytes.
    pub header_len: u32,
    pub tcp_flags: TcpFlags,
    /// Present iff `protocol == 6`.
    pub tcp_window: Option<u16>,
}

impl PacketRecord {
    pub fn reversed(&self) -> PacketRecord {
        PacketRecord {
            src_ip: self.dst_ip,
            dst_ip: self.src_ip,
            src_port: self.dst_port,
            dst_port: self.src_port,
            ..self.clone()
        }
    }
}

/// Why a frame did not yield a [`PacketRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skip {
    NonIp,
    /// IP packet carrying something other than TCP, UDP or ICMP.
    UnsupportedProtocol(u8),
    /// Non-initial IP fragment; no transport header to read.
    Fragment,
    Truncated,
    UnsupportedLinkType(u32),
}

pub fn decode_frame(linktype: u32, timestamp_us: i64, data: &[u8]) -> Result<PacketRecord, Skip> {
    let ip = match linktype {
        pcap::LINKTYPE_ETHERNET => ethernet_payload(data)?,
        pcap::LINKTYPE_NULL => {
            let af = data.get(0..4).ok_or(Skip::Truncated)?;
            let le = u32::from_le_bytes(af.try_into().unwrap());
            let be = u32::from_be_bytes(af.try_into().unwrap());
            let is_ip = |v: u32| matches!(v, 2 | 24 | 28 | 30);
            if !is_ip(le) && !is_ip(be) {
                return Err(Skip::NonIp);
            }
            &data[4..]
        }
        pcap::LINKTYPE_RAW | pcap::LINKTYPE_IPV4 | pcap::LINKTYPE_IPV6 => data,
        pcap::LINKTYPE_LINUX_SLL => {
            let proto = data.get(14..16).ok_or(Skip::Truncated)?;
            check_ethertype(u16::from_be_bytes([proto[0], proto[1]]))?;
            &data[16..]
        }
        pcap::LINKTYPE_LINUX_SLL2 => {
            let proto = data.get(0..2).ok_or(Skip::Truncated)?;
            check_ethertype(u16::from_be_bytes([proto[0], proto[1]]))?;
            data.get(20..).ok_or(Skip::Truncated)?
        }
        other => return Err(Skip::UnsupportedLinkType(other)),
    };
    decode_ip(timestamp_us, ip)
}

fn check_ethertype(ethertype: u16) -> Result<(), Skip> {
    match ethertype {
        0x0800 | 0x86dd => Ok(()),
        _ => Err(Skip::NonIp),
    }
}

fn ethernet_payload(data: &[u8]) -> Result<&[u8], Skip> {
    let mut off = 12;
    loop {
        let et = data.get(off..off + 2).ok_or(Skip::Truncated)?;
        let ethertype = u16::from_be_bytes([et[0], et[1]]);
        match ethertype {
            // 802.1Q / 802.1ad tags
            0x8100 | 0x88a8 | 0x9100 => off += 4,
            _ => {
                check_ethertype(ethertype)?;
                return Ok(&data[off + 2..]);
            }
        }
    }
}

pub fn decode_ip(timestamp_us: i64, ip: &[u8]) -> Result<PacketRecord, Skip> {
    let first = *ip.first().ok_or(Skip::Truncated)?;
    match first >> 4 {
        4 => decode_ipv4(timestamp_us, ip),
        6 => decode_ipv6(timestamp_us, ip),
        _ => Err(Skip::NonIp),
    }
}

fn decode_ipv4(timestamp_us: i64, ip: &[u8]) -> Result<PacketRecord, Skip> {
    if ip.len() < 20 {
        return Err(Skip::Truncated);
    }
    let ihl = ((ip[0] & 0x0f) as usize) * 4;
    if ihl < 20 || ip.len() < ihl {
        return Err(Skip::Truncated);
    }
    let total_len = u16::from_be_bytes([ip[2], ip[3]]) as usize;
    let frag_offset = u16::from_be_bytes([ip[6], ip[7]]) & 0x1fff;
    let protocol = ip[9];
    let src = IpAddr::V4(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]));
    let dst = IpAddr::V4(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]));
    if frag_offset != 0 {
        return Err(Skip::Fragment);
    }
    // TSO-offloaded captures carry total_len = 0
    let l4_len = if total_len >= ihl {
        total_len - ihl
    } else {
        ip.len() - ihl
    };
    decode_transport(timestamp_us, src, dst, protocol, ihl, &ip[ihl..], l4_len)
}

fn decode_ipv6(timestamp_us: i64, ip: &[u8]) -> Result<PacketRecord, Skip> {
    if ip.len() < 40 {
        return Err(Skip::Truncated);
    }
    let payload_len = u16::from_be_bytes([ip[4], ip[5]]) as usize;
    let mut next = ip[6];
    let src = IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&ip[8..24]).unwrap()));
    let dst = IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&ip[24..40]).unwrap()));
    let mut off = 40;
    loop {
        match next {
            0 | 43 | 60 => {
                let h = ip.get(off..off + 2).ok_or(Skip::Truncated)?;
                next = h[0];
                off += (h[1] as usize + 1) * 8;
            }
            44 => {
                let h = ip.get(off..off + 8).ok_or(Skip::Truncated)?;
                if u16::from_be_bytes([h[2], h[3]]) >> 3 != 0 {
                    return Err(Skip::Fragment);
                }
                next = h[0];
                off += 8;
            }
            51 => {
                let h = ip.get(off..off + 2).ok_or(Skip::Truncated)?;
                next = h[0];
                off += (h[1] as usize + 2) * 4;
            }
            _ => break,
        }
    }
    if off > ip.len() {
        return Err(Skip::Truncated);
    }
    let ext_len = off - 40;
    let l4_len = if payload_len > 0 {
        payload_len.saturating_sub(ext_len)
    } else {
        ip.len() - off
    };
    decode_transport(timestamp_us, src, dst, next, off, &ip[off..], l4_len)
}

fn decode_transport(
    timestamp_us: i64,
    src_ip: IpAddr,
    dst_ip: IpAddr,
    protocol: u8,
    ip_header_len: usize,
    l4: &[u8],
    l4_len: usize,
) -> Result<PacketRecord, Skip> {
    let (src_port, dst_port, l4_header, tcp_flags, tcp_window) = match protocol {
        PROTO_TCP => {
            if l4.len() < 20 {
                return Err(Skip::Truncated);
            }
            let data_offset = ((l4[12] >> 4) as usize) * 4;
            if data_offset < 20 {
                return Err(Skip::Truncated);
            }
            (
                u16::from_be_bytes([l4[0], l4[1]]),
                u16::from_be_bytes([l4[2], l4[3]]),
                data_offset,
                TcpFlags(l4[13]),
                Some(u16::from_be_bytes([l4[14], l4[15]])),
            )
        }
        PROTO_UDP => {
            if l4.len() < 8 {
                return Err(Skip::Truncated);
            }
            (
                u16::from_be_bytes([l4[0], l4[1]]),
                u16::from_be_bytes([l4[2], l4[3]]),
                8,
                TcpFlags::empty(),
                None,
            )
        }
        PROTO_ICMP | PROTO_ICMPV6 => {
            if l4.len() < 4 {
                return Err(Skip::Truncated);
            }
            (0, 0, l4_len.min(8), TcpFlags::empty(), None)
        }
        other => return Err(Skip::UnsupportedProtocol(other)),
    };
    Ok(PacketRecord {
        timestamp_us,
        src_ip,
        dst_ip,
        src_port,
        dst_port,
        protocol,
        payload_len: l4_len.saturating_sub(l4_header) as u32,
        header_len: (ip_header_len + l4_header) as u32,
        tcp_flags,
        tcp_window,
    })
}
