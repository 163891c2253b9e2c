//! Classic libpcap file reading and writing.
//!
//! Both byte orders and both timestamp resolutions (microsecond magic
//! `0xa1b2c3d4`, nanosecond magic `0xa1b23c4d`) are accepted. Records are
//! streamed one at a time so captures of any size can be processed.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
const MAGIC_NANOS: u32 = 0xa1b2_3c4d;

/// Records claiming more captured bytes than this are treated as corrupt.
const MAX_RECORD_LEN: u32 = 1 << 18;

pub const LINKTYPE_NULL: u32 = 0;
pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_RAW: u32 = 101;
pub const LINKTYPE_LINUX_SLL: u32 = 113;
pub const LINKTYPE_IPV4: u32 = 228;
pub const LINKTYPE_IPV6: u32 = 229;
pub const LINKTYPE_LINUX_SLL2: u32 = 276;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            ByteOrder::Little => u32::from_le_bytes(b),
            ByteOrder::Big => u32::from_be_bytes(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapHeader {
    pub version_major: u16,
    pub version_minor: u16,
    pub snaplen: u32,
    pub linktype: u32,
    pub nanosecond: bool,
}

/// One captured frame as stored in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub timestamp_us: i64,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

#[derive(Debug)]
pub enum NextRecord {
    Record(RawRecord),
    /// The file ended in the middle of a record, or a record header was corrupt.
    Truncated,
    End,
}

pub struct PcapReader<R> {
    inner: R,
    order: ByteOrder,
    header: PcapHeader,
    done: bool,
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut buf = [0u8; 24];
        let got = read_full(&mut inner, &mut buf)?;
        if got < 4 {
            return Err(Error::Format("file too short for a pcap magic".into()));
        }
        let magic: [u8; 4] = buf[0..4].try_into().unwrap();
        let (order, nanosecond) = match (u32::from_le_bytes(magic), u32::from_be_bytes(magic)) {
            (MAGIC_MICROS, _) => (ByteOrder::Little, false),
            (MAGIC_NANOS, _) => (ByteOrder::Little, true),
            (_, MAGIC_MICROS) => (ByteOrder::Big, false),
            (_, MAGIC_NANOS) => (ByteOrder::Big, true),
            _ => {
                return Err(Error::Format(format!(
                    "unrecognized magic 0x{:08x} (pcapng and other formats are not supported)",
                    u32::from_be_bytes(magic)
                )))
            }
        };
        if got < 24 {
            return Err(Error::Format("truncated pcap global header".into()));
        }
        let u16_at = |i: usize| {
            let b = [buf[i], buf[i + 1]];
            match order {
                ByteOrder::Little => u16::from_le_bytes(b),
                ByteOrder::Big => u16::from_be_bytes(b),
            }
        };
        let u32_at = |i: usize| order.u32(buf[i..i + 4].try_into().unwrap());
        let header = PcapHeader {
            version_major: u16_at(4),
            version_minor: u16_at(6),
            snaplen: u32_at(16),
            // upper bits may carry FCS information
            linktype: u32_at(20) & 0x0fff_ffff,
            nanosecond,
        };
        Ok(PcapReader {
            inner,
            order,
            header,
            done: false,
        })
    }

    pub fn header(&self) -> &PcapHeader {
        &self.header
    }

    pub fn next_record(&mut self) -> Result<NextRecord> {
        if self.done {
            return Ok(NextRecord::End);
        }
        let mut hdr = [0u8; 16];
        let got = read_full(&mut self.inner, &mut hdr)?;
        if got == 0 {
            self.done = true;
            return Ok(NextRecord::End);
        }
        if got < 16 {
            self.done = true;
            return Ok(NextRecord::Truncated);
        }
        let word = |i: usize| self.order.u32(hdr[i..i + 4].try_into().unwrap());
        let ts_sec = word(0) as i64;
        let ts_frac = word(4) as i64;
        let incl_len = word(8);
        let orig_len = word(12);
        if incl_len > MAX_RECORD_LEN {
            // no way to resynchronize after a corrupt length
            self.done = true;
            return Ok(NextRecord::Truncated);
        }
        let mut data = vec![0u8; incl_len as usize];
        let got = read_full(&mut self.inner, &mut data)?;
        if got < data.len() {
            self.done = true;
            return Ok(NextRecord::Truncated);
        }
        let frac_us = if self.header.nanosecond {
            ts_frac / 1000
        } else {
            ts_frac
        };
        Ok(NextRecord::Record(RawRecord {
            timestamp_us: ts_sec * 1_000_000 + frac_us,
            orig_len,
            data,
        }))
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Writes little-endian, microsecond-resolution classic pcap.
pub struct PcapWriter<W> {
    inner: W,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W, linktype: u32) -> io::Result<Self> {
        let mut hdr = Vec::with_capacity(24);
        hdr.extend_from_slice(&MAGIC_MICROS.to_le_bytes());
        hdr.extend_from_slice(&2u16.to_le_bytes());
        hdr.extend_from_slice(&4u16.to_le_bytes());
        hdr.extend_from_slice(&0i32.to_le_bytes());
        hdr.extend_from_slice(&0u32.to_le_bytes());
        hdr.extend_from_slice(&65535u32.to_le_bytes());
        hdr.extend_from_slice(&linktype.to_le_bytes());
        inner.write_all(&hdr)?;
        Ok(PcapWriter { inner })
    }

    pub fn write_record(&mut self, timestamp_us: i64, data: &[u8]) -> io::Result<()> {
        let sec = timestamp_us.div_euclid(1_000_000) as u32;
        let usec = timestamp_us.rem_euclid(1_000_000) as u32;
        let len = data.len() as u32;
        let mut hdr = [0u8; 16];
        hdr[0..4].copy_from_slice(&sec.to_le_bytes());
        hdr[4..8].copy_from_slice(&usec.to_le_bytes());
        hdr[8..12].copy_from_slice(&len.to_le_bytes());
        hdr[12..16].copy_from_slice(&len.to_le_bytes());
        self.inner.write_all(&hdr)?;
        self.inner.write_all(data)
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_bytes(magic: u32, big: bool, linktype: u32) -> Vec<u8> {
        let mut v = Vec::new();
        let put32 = |v: &mut Vec<u8>, x: u32| {
            if big {
                v.extend_from_slice(&x.to_be_bytes())
            } else {
                v.extend_from_slice(&x.to_le_bytes())
            }
        };
        put32(&mut v, magic);
        let (maj, min) = (2u16, 4u16);
        if big {
            v.extend_from_slice(&maj.to_be_bytes());
            v.extend_from_slice(&min.to_be_bytes());
        } else {
            v.extend_from_slice(&maj.to_le_bytes());
            v.extend_from_slice(&min.to_le_bytes());
        }
        put32(&mut v, 0);
        put32(&mut v, 0);
        put32(&mut v, 65535);
        put32(&mut v, linktype);
        v
    }

    #[test]
    fn accepts_all_four_magic_variants() {
        for (magic, big, ns) in [
            (MAGIC_MICROS, false, false),
            (MAGIC_MICROS, true, false),
            (MAGIC_NANOS, false, true),
            (MAGIC_NANOS, true, true),
        ] {
            let mut bytes = header_bytes(magic, big, 1);
            let rec: [u32; 4] = [10, if ns { 5_000_000 } else { 5_000 }, 2, 2];
            for w in rec {
                if big {
                    bytes.extend_from_slice(&w.to_be_bytes());
                } else {
                    bytes.extend_from_slice(&w.to_le_bytes());
                }
            }
            bytes.extend_from_slice(&[0xaa, 0xbb]);
            let mut r = PcapReader::new(bytes.as_slice()).unwrap();
            assert_eq!(r.header().linktype, 1);
            assert_eq!(r.header().nanosecond, ns);
            match r.next_record().unwrap() {
                NextRecord::Record(rec) => {
                    assert_eq!(rec.timestamp_us, 10_005_000);
                    assert_eq!(rec.data, vec![0xaa, 0xbb]);
                }
                other => panic!("unexpected {other:?}"),
            }
            assert!(matches!(r.next_record().unwrap(), NextRecord::End));
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = header_bytes(0x0a0d0d0a, false, 1);
        assert!(matches!(
            PcapReader::new(bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_record_is_reported_then_ends() {
        let mut w = PcapWriter::new(Vec::new(), LINKTYPE_ETHERNET).unwrap();
        w.write_record(1, &[1, 2, 3, 4]).unwrap();
        w.write_record(2, &[1, 2, 3, 4]).unwrap();
        let mut bytes = w.into_inner();
        bytes.truncate(bytes.len() - 2);
        let mut r = PcapReader::new(bytes.as_slice()).unwrap();
        assert!(matches!(r.next_record().unwrap(), NextRecord::Record(_)));
        assert!(matches!(r.next_record().unwrap(), NextRecord::Truncated));
        assert!(matches!(r.next_record().unwrap(), NextRecord::End));
    }

    #[test]
    fn writer_roundtrips_negative_free_timestamps() {
        let mut w = PcapWriter::new(Vec::new(), LINKTYPE_RAW).unwrap();
        w.write_record(1_600_000_000_123_456, &[9; 10]).unwrap();
        let bytes = w.into_inner();
        let mut r = PcapReader::new(bytes.as_slice()).unwrap();
        assert_eq!(r.header().linktype, LINKTYPE_RAW);
        let NextRecord::Record(rec) = r.next_record().unwrap() else {
            panic!()
        };
        assert_eq!(rec.timestamp_us, 1_600_000_000_123_456);
        assert_eq!(rec.orig_len, 10);
    }
}
