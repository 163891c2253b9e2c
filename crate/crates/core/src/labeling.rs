//! Ground-truth labeling of flows by 5-tuple rules.
//!
//! Precedence: a fully specified rule matching the flow's forward
//! orientation, then a fully specified rule matching the reversed
//! orientation, then any wildcard rule (either orientation). Within a tier
//! the first rule in file order wins. Rules with a time window only match
//! flows whose start timestamp lies inside it.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::net::IpAddr;
use std::path::Path;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::FeatureVector;
use crate::packet::{PROTO_ICMP, PROTO_ICMPV6, PROTO_TCP, PROTO_UDP};

pub const DEFAULT_LABEL: &str = "Normal";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRule {
    pub src_ip: Option<IpAddr>,
    pub src_port: Option<u16>,
    pub dst_ip: Option<IpAddr>,
    pub dst_port: Option<u16>,
    pub protocol: Option<u8>,
    pub label: String,
    /// Inclusive `[start_us, end_us]` on the flow start time.
    pub window: Option<(i64, i64)>,
}

type Tuple = (IpAddr, u16, IpAddr, u16, u8);

impl LabelRule {
    pub fn exact(src: (IpAddr, u16), dst: (IpAddr, u16), protocol: u8, label: &str) -> Self {
        LabelRule {
            src_ip: Some(src.0),
            src_port: Some(src.1),
            dst_ip: Some(dst.0),
            dst_port: Some(dst.1),
            protocol: Some(protocol),
            label: label.to_string(),
            window: None,
        }
    }

    /// Every flow to or from `ip`.
    pub fn source(ip: IpAddr, label: &str) -> Self {
        LabelRule {
            src_ip: Some(ip),
            src_port: None,
            dst_ip: None,
            dst_port: None,
            protocol: None,
            label: label.to_string(),
            window: None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.tuple().is_some()
    }

    fn tuple(&self) -> Option<Tuple> {
        Some((
            self.src_ip?,
            self.src_port?,
            self.dst_ip?,
            self.dst_port?,
            self.protocol?,
        ))
    }

    fn matches(&self, t: &Tuple) -> bool {
        self.src_ip.map_or(true, |v| v == t.0)
            && self.src_port.map_or(true, |v| v == t.1)
            && self.dst_ip.map_or(true, |v| v == t.2)
            && self.dst_port.map_or(true, |v| v == t.3)
            && self.protocol.map_or(true, |v| v == t.4)
    }

    fn in_window(&self, ts: i64) -> bool {
        self.window.map_or(true, |(s, e)| s <= ts && ts <= e)
    }
}

fn forward_tuple(fv: &FeatureVector) -> Tuple {
    (fv.src_ip, fv.src_port, fv.dst_ip, fv.dst_port, fv.protocol)
}

fn reverse(t: &Tuple) -> Tuple {
    (t.2, t.3, t.0, t.1, t.4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatchTier {
    Exact,
    Reversed,
    Wildcard,
}

/// Compiled rule set; exact rules are indexed by tuple.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<LabelRule>,
    exact: HashMap<Tuple, Vec<usize>>,
    wildcard: Vec<usize>,
}

impl RuleSet {
    pub fn new(rules: Vec<LabelRule>) -> Self {
        let mut exact: HashMap<Tuple, Vec<usize>> = HashMap::new();
        let mut wildcard = Vec::new();
        for (i, r) in rules.iter().enumerate() {
            match r.tuple() {
                Some(t) => exact.entry(t).or_default().push(i),
                None => wildcard.push(i),
            }
        }
        RuleSet {
            rules,
            exact,
            wildcard,
        }
    }

    pub fn rules(&self) -> &[LabelRule] {
        &self.rules
    }

    pub fn lookup(&self, fv: &FeatureVector) -> Option<(&LabelRule, MatchTier)> {
        let fwd = forward_tuple(fv);
        let rev = reverse(&fwd);
        let ts = fv.timestamp_us;
        let first_exact = |t: &Tuple| {
            self.exact.get(t).and_then(|ids| {
                ids.iter()
                    .map(|&i| &self.rules[i])
                    .find(|r| r.in_window(ts))
            })
        };
        if let Some(r) = first_exact(&fwd) {
            return Some((r, MatchTier::Exact));
        }
        if let Some(r) = first_exact(&rev) {
            return Some((r, MatchTier::Reversed));
        }
        self.wildcard
            .iter()
            .map(|&i| &self.rules[i])
            .find(|r| r.in_window(ts) && (r.matches(&fwd) || r.matches(&rev)))
            .map(|r| (r, MatchTier::Wildcard))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub features: FeatureVector,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MatchReport {
    pub per_label: BTreeMap<String, usize>,
    pub unmatched: usize,
    pub exact: usize,
    pub reversed: usize,
    pub wildcard: usize,
}

pub fn label_flows(
    rows: &[FeatureVector],
    rules: &RuleSet,
    default_label: &str,
) -> (Vec<LabeledRow>, MatchReport) {
    let mut report = MatchReport::default();
    let labeled: Vec<LabeledRow> = rows
        .iter()
        .map(|fv| {
            let label = match rules.lookup(fv) {
                Some((rule, tier)) => {
                    match tier {
                        MatchTier::Exact => report.exact += 1,
                        MatchTier::Reversed => report.reversed += 1,
                        MatchTier::Wildcard => report.wildcard += 1,
                    }
                    rule.label.clone()
                }
                None => {
                    report.unmatched += 1;
                    default_label.to_string()
                }
            };
            *report.per_label.entry(label.clone()).or_default() += 1;
            LabeledRow {
                features: fv.clone(),
                label,
            }
        })
        .collect();
    if report.unmatched > 0 {
        warn!(
            "{} of {} flows matched no ground-truth rule and were labeled `{}`",
            report.unmatched,
            rows.len(),
            default_label
        );
    }
    (labeled, report)
}

/// Binary class used for training: 0 for the negative label, 1 otherwise.
pub fn binary_class(label: &str, negative_label: &str) -> u8 {
    if label.trim().eq_ignore_ascii_case(negative_label) {
        0
    } else {
        1
    }
}

const RULE_COLUMNS: [&str; 6] = ["src_ip", "src_port", "dst_ip", "dst_port", "protocol", "label"];

pub fn parse_rules_file(path: impl AsRef<Path>) -> Result<Vec<LabelRule>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_rules(BufReader::new(file))
}

/// Reads a rule CSV with header `src_ip,src_port,dst_ip,dst_port,protocol,label`
/// and optional `start`,`end` (microseconds). `*` is a wildcard.
pub fn parse_rules<R: Read>(input: R) -> Result<Vec<LabelRule>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers: Vec<String> = r.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 6];
    for (slot, name) in RULE_COLUMNS.iter().enumerate() {
        idx[slot] = col(name).ok_or_else(|| Error::Schema(name.to_string()))?;
    }
    let start_col = col("start").or_else(|| col("start_us"));
    let end_col = col("end").or_else(|| col("end_us"));

    let mut rules = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| Error::Row { line, message };
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let wild = |v: &str| v.is_empty() || v == "*";
        let ip = |c: usize| -> Result<Option<IpAddr>> {
            let v = cell(c);
            if wild(v) {
                return Ok(None);
            }
            v.parse()
                .map(Some)
                .map_err(|_| err(format!("unparseable IP address `{v}`")))
        };
        let port = |c: usize| -> Result<Option<u16>> {
            let v = cell(c);
            if wild(v) {
                return Ok(None);
            }
            v.parse()
                .map(Some)
                .map_err(|_| err(format!("unparseable port `{v}`")))
        };
        let proto = {
            let v = cell(idx[4]);
            if wild(v) {
                None
            } else {
                Some(parse_protocol(v).ok_or_else(|| err(format!("unknown protocol `{v}`")))?)
            }
        };
        let label = cell(idx[5]).to_string();
        if label.is_empty() {
            return Err(err("empty label".into()));
        }
        let ts = |c: Option<usize>| -> Result<Option<i64>> {
            match c.map(cell) {
                None => Ok(None),
                Some(v) if v.is_empty() || v == "*" => Ok(None),
                Some(v) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| err(format!("unparseable timestamp `{v}`"))),
            }
        };
        let window = match (ts(start_col)?, ts(end_col)?) {
            (None, None) => None,
            (Some(s), Some(e)) if s <= e => Some((s, e)),
            (Some(_), Some(_)) => return Err(err("window start after end".into())),
            (Some(s), None) => Some((s, i64::MAX)),
            (None, Some(e)) => Some((i64::MIN, e)),
        };
        rules.push(LabelRule {
            src_ip: ip(idx[0])?,
            src_port: port(idx[1])?,
            dst_ip: ip(idx[2])?,
            dst_port: port(idx[3])?,
            protocol: proto,
            label,
            window,
        });
    }
    Ok(rules)
}

fn parse_protocol(v: &str) -> Option<u8> {
    match v.to_ascii_lowercase().as_str() {
        "tcp" => Some(PROTO_TCP),
        "udp" => Some(PROTO_UDP),
        "icmp" => Some(PROTO_ICMP),
        "icmpv6" | "ipv6-icmp" => Some(PROTO_ICMPV6),
        other => other.parse().ok(),
    }
}

pub fn write_rules<W: Write>(out: W, rules: &[LabelRule]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_window = rules.iter().any(|r| r.window.is_some());
    let mut header: Vec<&str> = RULE_COLUMNS.to_vec();
    if with_window {
        header.extend(["start", "end"]);
    }
    w.write_record(&header)?;
    let opt = |v: Option<String>| v.unwrap_or_else(|| "*".into());
    for r in rules {
        let mut row = vec![
            opt(r.src_ip.map(|v| v.to_string())),
            opt(r.src_port.map(|v| v.to_string())),
            opt(r.dst_ip.map(|v| v.to_string())),
            opt(r.dst_port.map(|v| v.to_string())),
            opt(r.protocol.map(|v| v.to_string())),
            r.label.clone(),
        ];
        if with_window {
            let (s, e) = r.window.unzip();
            row.push(opt(s.map(|v| v.to_string())));
            row.push(opt(e.map(|v| v.to_string())));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
