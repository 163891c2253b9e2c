//! Shared test support: a brute-force flow oracle working straight from
//! synthetic blueprints, random capture generators and engineered datasets.

#![allow(dead_code)]

use std::net::IpAddr;

use botflow::classifiers::LogisticObjective;
use botflow::dataset::FeatureTable;
use botflow::flow::{Feature, FeatureVector, MeterConfig, FEATURE_COUNT};
use botflow::packet::{TcpFlags, PROTO_TCP, PROTO_UDP};
use botflow::synth::{timeline, Dir, FlowBlueprint, PacketBlueprint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A packet as the oracle sees it, derived from the blueprint alone.
#[derive(Debug, Clone)]
struct OPkt {
    ts: i64,
    src: (IpAddr, u16),
    dst: (IpAddr, u16),
    proto: u8,
    len: f64,
    hdr: f64,
    flags: u8,
    win: Option<u16>,
}

fn oracle_packets(bps: &[FlowBlueprint]) -> Vec<OPkt> {
    timeline(bps)
        .into_iter()
        .map(|e| {
            let bp = &bps[e.flow];
            let p = &bp.packets[e.packet];
            let (src, dst) = match p.dir {
                Dir::Fwd => (bp.client, bp.server),
                Dir::Bwd => (bp.server, bp.client),
            };
            let ip_hdr = if src.0.is_ipv4() { 20.0 } else { 40.0 };
            let l4_hdr = match bp.protocol {
                PROTO_TCP => 20.0,
                PROTO_UDP => 8.0,
                _ => 8.0,
            };
            OPkt {
                ts: e.timestamp_us,
                src,
                dst,
                proto: bp.protocol,
                len: p.payload_len as f64,
                hdr: ip_hdr + l4_hdr,
                flags: p.flags.bits(),
                win: p.window,
            }
        })
        .collect()
}

fn same_conversation(a: &OPkt, b: &OPkt) -> bool {
    a.proto == b.proto && ((a.src == b.src && a.dst == b.dst) || (a.src == b.dst && a.dst == b.src))
}

fn has(flags: u8, f: TcpFlags) -> bool {
    flags & f.bits() != 0
}

/// Two-pass summary of a sample: (count, sum, mean, sample std, min, max).
fn summary(xs: &[f64]) -> (f64, f64, f64, f64, f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    }
    let n = xs.len() as f64;
    let sum: f64 = xs.iter().sum();
    let mean = sum / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (n, sum, mean, std, min, max)
}

fn diffs(ts: &[i64]) -> Vec<f64> {
    ts.windows(2).map(|w| (w[1] - w[0]) as f64).collect()
}

fn private(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v) => {
            let o = v.octets();
            o[0] == 10 || (o[0] == 172 && (16..32).contains(&o[1])) || (o[0] == 192 && o[1] == 168)
        }
        IpAddr::V6(v) => v.octets()[0] & 0xfe == 0xfc,
    }
}

fn oracle_features(pkts: &[OPkt], activity_us: i64) -> FeatureVector {
    use Feature::*;
    let first = &pkts[0];
    let fwd: Vec<&OPkt> = pkts.iter().filter(|p| p.src == first.src && p.dst == first.dst).collect();
    let bwd: Vec<&OPkt> = pkts.iter().filter(|p| !(p.src == first.src && p.dst == first.dst)).collect();
    let all_len: Vec<f64> = pkts.iter().map(|p| p.len).collect();
    let fwd_len: Vec<f64> = fwd.iter().map(|p| p.len).collect();
    let bwd_len: Vec<f64> = bwd.iter().map(|p| p.len).collect();
    let ts: Vec<i64> = pkts.iter().map(|p| p.ts).collect();
    let fwd_ts: Vec<i64> = fwd.iter().map(|p| p.ts).collect();
    let bwd_ts: Vec<i64> = bwd.iter().map(|p| p.ts).collect();

    // active/idle: a gap above the activity timeout separates active periods
    let mut active = Vec::new();
    let mut idle = Vec::new();
    let mut period_start = ts[0];
    let mut prev = ts[0];
    for &t in &ts[1..] {
        if t - prev > activity_us {
            if prev > period_start {
                active.push((prev - period_start) as f64);
            }
            idle.push((t - prev) as f64);
            period_start = t;
        }
        prev = t;
    }
    if prev > period_start {
        active.push((prev - period_start) as f64);
    }

    let duration = (ts[ts.len() - 1] - ts[0]) as f64;
    let rate = |x: f64| if duration > 0.0 { x / (duration / 1e6) } else { 0.0 };
    let (fn_, fsum, fmean, fstd, fmin, fmax) = summary(&fwd_len);
    let (bn, bsum, bmean, bstd, bmin, bmax) = summary(&bwd_len);
    let (an, asum, amean, astd, amin, amax) = summary(&all_len);
    let (_, _, im, is, imin, imax) = summary(&diffs(&ts));
    let (_, fit, fim, fis, fimin, fimax) = summary(&diffs(&fwd_ts));
    let (_, bit, bim, bis, bimin, bimax) = summary(&diffs(&bwd_ts));
    let (_, _, acm, acs, acmin, acmax) = summary(&active);
    let (_, _, idm, ids, idmin, idmax) = summary(&idle);
    let count = |sel: &[&OPkt], f: TcpFlags| sel.iter().filter(|p| has(p.flags, f)).count() as f64;
    let everyone: Vec<&OPkt> = pkts.iter().collect();
    let init_win = |sel: &[&OPkt]| sel.iter().find_map(|p| p.win).map_or(-1.0, |w| w as f64);

    let mut v = [f64::NAN; FEATURE_COUNT];
    let mut put = |f: Feature, x: f64| v[f.index()] = x;
    put(FlowDuration, duration);
    put(TotalFwdPackets, fn_);
    put(TotalBwdPackets, bn);
    put(TotalLenFwd, fsum);
    put(TotalLenBwd, bsum);
    put(FwdLenMax, fmax);
    put(FwdLenMin, fmin);
    put(FwdLenMean, fmean);
    put(FwdLenStd, fstd);
    put(BwdLenMax, bmax);
    put(BwdLenMin, bmin);
    put(BwdLenMean, bmean);
    put(BwdLenStd, bstd);
    put(FlowBytesPerSec, rate(asum));
    put(FlowPacketsPerSec, rate(an));
    put(FlowIatMean, im);
    put(FlowIatStd, is);
    put(FlowIatMax, imax);
    put(FlowIatMin, imin);
    put(FwdIatTotal, fit);
    put(FwdIatMean, fim);
    put(FwdIatStd, fis);
    put(FwdIatMax, fimax);
    put(FwdIatMin, fimin);
    put(BwdIatTotal, bit);
    put(BwdIatMean, bim);
    put(BwdIatStd, bis);
    put(BwdIatMax, bimax);
    put(BwdIatMin, bimin);
    put(FwdPshFlags, count(&fwd, TcpFlags::PSH));
    put(BwdPshFlags, count(&bwd, TcpFlags::PSH));
    put(FwdUrgFlags, count(&fwd, TcpFlags::URG));
    put(BwdUrgFlags, count(&bwd, TcpFlags::URG));
    put(FwdHeaderLen, fwd.iter().map(|p| p.hdr).sum());
    put(BwdHeaderLen, bwd.iter().map(|p| p.hdr).sum());
    put(FwdPacketsPerSec, rate(fn_));
    put(BwdPacketsPerSec, rate(bn));
    put(MinPacketLen, amin);
    put(MaxPacketLen, amax);
    put(PacketLenMean, amean);
    put(PacketLenStd, astd);
    put(PacketLenVariance, astd * astd);
    put(FinFlagCount, count(&everyone, TcpFlags::FIN));
    put(SynFlagCount, count(&everyone, TcpFlags::SYN));
    put(RstFlagCount, count(&everyone, TcpFlags::RST));
    put(PshFlagCount, count(&everyone, TcpFlags::PSH));
    put(AckFlagCount, count(&everyone, TcpFlags::ACK));
    put(UrgFlagCount, count(&everyone, TcpFlags::URG));
    put(CwrFlagCount, count(&everyone, TcpFlags::CWR));
    put(EceFlagCount, count(&everyone, TcpFlags::ECE));
    put(DownUpRatio, if fn_ > 0.0 { bn / fn_ } else { 0.0 });
    put(AvgPacketSize, if an > 0.0 { asum / an } else { 0.0 });
    put(AvgFwdSegmentSize, fmean);
    put(AvgBwdSegmentSize, bmean);
    put(InitFwdWinBytes, init_win(&fwd));
    put(InitBwdWinBytes, init_win(&bwd));
    put(ActiveMean, acm);
    put(ActiveStd, acs);
    put(ActiveMax, acmax);
    put(ActiveMin, acmin);
    put(IdleMean, idm);
    put(IdleStd, ids);
    put(IdleMax, idmax);
    put(IdleMin, idmin);
    put(Inbound, if private(first.dst.0) { 1.0 } else { 0.0 });

    FeatureVector {
        flow_id: format!("{}-{}-{}-{}-{}", first.src.0, first.dst.0, first.src.1, first.dst.1, first.proto),
        src_ip: first.src.0,
        src_port: first.src.1,
        dst_ip: first.dst.0,
        dst_port: first.dst.1,
        protocol: first.proto,
        timestamp_us: first.ts,
        values: v,
    }
}

/// Expected flows of a capture built from `bps`, by exhaustive replay:
/// every open conversation is searched linearly for each packet.
pub fn oracle_flows(bps: &[FlowBlueprint], cfg: &MeterConfig) -> Vec<FeatureVector> {
    let pkts = oracle_packets(bps);
    let mut open: Vec<Vec<OPkt>> = Vec::new();
    let mut closed: Vec<Vec<OPkt>> = Vec::new();
    for p in pkts {
        let pos = open.iter().position(|f| same_conversation(&f[0], &p));
        let pos = match pos {
            Some(i) if p.ts - open[i].iter().map(|q| q.ts).max().unwrap() > cfg.flow_timeout_us => {
                closed.push(open.remove(i));
                None
            }
            other => other,
        };
        let i = match pos {
            Some(i) => i,
            None => {
                open.push(Vec::new());
                open.len() - 1
            }
        };
        let flow = &mut open[i];
        let ended = p.proto == PROTO_TCP && {
            let fwd = (flow.first().unwrap_or(&p).src, flow.first().unwrap_or(&p).dst);
            let fin_fwd = flow.iter().any(|q| (q.src, q.dst) == fwd && has(q.flags, TcpFlags::FIN));
            let fin_bwd = flow.iter().any(|q| (q.src, q.dst) != fwd && has(q.flags, TcpFlags::FIN));
            has(p.flags, TcpFlags::RST) || (!flow.is_empty() && fin_fwd && fin_bwd && has(p.flags, TcpFlags::ACK))
        };
        flow.push(p);
        if ended {
            closed.push(open.remove(i));
        }
    }
    closed.extend(open);
    closed
        .iter()
        .map(|f| oracle_features(f, cfg.activity_timeout_us))
        .collect()
}

pub fn sort_flows(flows: &mut [FeatureVector]) {
    flows.sort_by(|a, b| (a.timestamp_us, &a.flow_id).cmp(&(b.timestamp_us, &b.flow_id)));
}

/// Integer-valued features compared exactly; the rest within 1e-9 relative.
pub fn is_count(f: Feature) -> bool {
    use Feature::*;
    matches!(
        f,
        TotalFwdPackets
            | TotalBwdPackets
            | TotalLenFwd
            | TotalLenBwd
            | FwdLenMax
            | FwdLenMin
            | BwdLenMax
            | BwdLenMin
            | FwdPshFlags
            | BwdPshFlags
            | FwdUrgFlags
            | BwdUrgFlags
            | FwdHeaderLen
            | BwdHeaderLen
            | MinPacketLen
            | MaxPacketLen
            | FinFlagCount
            | SynFlagCount
            | RstFlagCount
            | PshFlagCount
            | AckFlagCount
            | UrgFlagCount
            | CwrFlagCount
            | EceFlagCount
            | InitFwdWinBytes
            | InitBwdWinBytes
            | FlowDuration
            | Inbound
    )
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Compares two flow lists after sorting; returns the first mismatch.
pub fn compare_flows(mut got: Vec<FeatureVector>, mut want: Vec<FeatureVector>) -> Result<(), String> {
    sort_flows(&mut got);
    sort_flows(&mut want);
    if got.len() != want.len() {
        return Err(format!("{} flows, oracle expects {}", got.len(), want.len()));
    }
    for (g, w) in got.iter().zip(&want) {
        if (&g.flow_id, g.timestamp_us, g.src_ip, g.src_port, g.dst_ip, g.dst_port, g.protocol)
            != (&w.flow_id, w.timestamp_us, w.src_ip, w.src_port, w.dst_ip, w.dst_port, w.protocol)
        {
            return Err(format!("identity {} @{} vs {} @{}", g.flow_id, g.timestamp_us, w.flow_id, w.timestamp_us));
        }
        for &f in Feature::ALL {
            let (a, b) = (g[f], w[f]);
            let ok = if is_count(f) { a == b } else { close(a, b) };
            if !ok {
                return Err(format!("{} {}: got {a}, oracle {b}", g.flow_id, f.name()));
            }
        }
    }
    Ok(())
}

/// Random TCP/UDP blueprints with at most `max_packets` packets in total.
/// Endpoints come from a small pool so conversations collide and flows
/// get split by timeouts and teardown.
pub fn random_blueprints(rng: &mut ChaCha8Rng, max_packets: usize) -> Vec<FlowBlueprint> {
    let hosts: Vec<IpAddr> = if rng.gen_bool(0.15) {
        (1..5).map(|i| format!("fd00::{i}").parse().unwrap()).collect()
    } else {
        vec![
            "192.168.1.10".parse().unwrap(),
            "10.1.2.3".parse().unwrap(),
            "8.8.4.4".parse().unwrap(),
            "203.0.113.9".parse().unwrap(),
        ]
    };
    let ports = [53u16, 80, 443, 40000, 40001];
    let mut budget = rng.gen_range(1..=max_packets);
    let mut out = Vec::new();
    while budget > 0 {
        let n = rng.gen_range(1..=budget.min(40));
        budget -= n;
        let a = hosts[rng.gen_range(0..hosts.len())];
        let mut b = hosts[rng.gen_range(0..hosts.len())];
        if a == b {
            b = hosts[(hosts.iter().position(|h| *h == a).unwrap() + 1) % hosts.len()];
        }
        let protocol = if rng.gen_bool(0.6) { PROTO_TCP } else { PROTO_UDP };
        let packets = (0..n)
            .map(|i| {
                let dir = if rng.gen_bool(0.55) { Dir::Fwd } else { Dir::Bwd };
                let gap = match rng.gen_range(0..10) {
                    0 => rng.gen_range(3_000_000..15_000_000),
                    1 => 0,
                    _ => rng.gen_range(1..900_000),
                };
                let mut p = PacketBlueprint::new(dir, rng.gen_range(0..1500), if i == 0 { 0 } else { gap });
                if protocol == PROTO_TCP {
                    let mut bits = 0u8;
                    for (f, prob) in [
                        (TcpFlags::ACK, 0.8),
                        (TcpFlags::PSH, 0.3),
                        (TcpFlags::SYN, 0.05),
                        (TcpFlags::FIN, 0.06),
                        (TcpFlags::RST, 0.02),
                        (TcpFlags::URG, 0.03),
                        (TcpFlags::ECE, 0.02),
                        (TcpFlags::CWR, 0.02),
                    ] {
                        if rng.gen_bool(prob) {
                            bits |= f.bits();
                        }
                    }
                    p = p.flags(TcpFlags(bits)).window(rng.gen());
                }
                p
            })
            .collect();
        out.push(FlowBlueprint {
            client: (a, ports[rng.gen_range(0..ports.len())]),
            server: (b, ports[rng.gen_range(0..ports.len())]),
            protocol,
            start_us: 1_000_000_000 + rng.gen_range(0..30_000_000),
            packets,
        });
    }
    out
}

/// Meter settings small enough that random gaps straddle both timeouts.
pub fn random_meter(rng: &mut ChaCha8Rng) -> MeterConfig {
    let activity = rng.gen_range(500_000..4_000_000);
    MeterConfig {
        flow_timeout_us: activity + rng.gen_range(1_000_000..10_000_000),
        activity_timeout_us: activity,
        ..MeterConfig::default()
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian draw via Box-Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Linearly separable data shaped like attack-vs-normal flow features:
/// every feature is shifted by +/-1.5 according to the class, and points
/// within distance 1 of (or beyond) the hyperplane sum(x) = 0 are redrawn.
pub fn separable_table(n: usize, d: usize, seed: u64) -> FeatureTable {
    let mut rng = seeded(seed);
    let norm = (d as f64).sqrt();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let y = (rows.len() % 2) as u8;
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let x: Vec<f64> = (0..d).map(|_| sign * 1.5 + normal(&mut rng)).collect();
        if sign * x.iter().sum::<f64>() / norm < 1.0 {
            continue;
        }
        labels.push(y);
        rows.push(x);
    }
    let cols = (0..d).map(|j| format!("f{j}")).collect();
    FeatureTable::new(cols, rows, Some(labels)).unwrap()
}

/// Class 0 has x2 close to x1, class 1 has x2 close to -x1; the other
/// columns are noise. Each feature alone is useless, so naive Bayes fails
/// while trees can use the interaction.
pub fn correlated_table(n: usize, d: usize, seed: u64) -> FeatureTable {
    let mut rng = seeded(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = (i % 2) as u8;
        let x1 = normal(&mut rng) * 3.0;
        let x2 = if y == 0 { x1 } else { -x1 } + normal(&mut rng) * 0.3;
        let mut row = vec![x1, x2];
        row.extend((2..d).map(|_| normal(&mut rng)));
        rows.push(row);
        labels.push(y);
    }
    let cols = (0..d).map(|j| format!("f{j}")).collect();
    FeatureTable::new(cols, rows, Some(labels)).unwrap()
}

/// Top-10 rankings published for three botnet datasets, each in its own spelling.
pub const PUBLISHED_TOP10: [(&str, [&str; 10]); 3] = [
    (
        "IoT-23",
        [
            "Pkt Len Mean",
            "Bwd Pkt Len Min",
            "Pkt Len Min",
            "Pkt Size Avg",
            "Bwd Header Len",
            "Bwd IAT Max",
            "Bwd Pkt Len Mean",
            "Flow Byts/s",
            "Flow IAT Max",
            "Fwd Pkt Len Mean",
        ],
    ),
    (
        "CTU-13",
        [
            "Init Bwd Win Byts",
            "Bwd Pkts/s",
            "Flow Pkts/s",
            "Fwd Pkts/s",
            "Pkt Len Mean",
            "Pkt Size Avg",
            "Active Mean",
            "Active Min",
            "Bwd IAT Min",
            "Down/Up Ratio",
        ],
    ),
    (
        "CICIDS-17",
        [
            "Inbound",
            "Average Packet Size",
            "Avg Fwd Segment Size",
            "Fwd Packet Length Mean",
            "Fwd Packet Length Min",
            "Min Packet Length",
            "Packet Length Mean",
            "URG Flag Count",
            "Down/Up Ratio",
            "Bwd Packet Length Min",
        ],
    ),
];

pub const UNIVERSAL_SIX: [&str; 6] = [
    "Packet Length Mean",
    "Average Packet Size",
    "Fwd Packet Length Mean",
    "Bwd Packet Length Min",
    "Min Packet Length",
    "Down/Up Ratio",
];

/// Labeled feature CSV text for dataset `which` of three: the six shared
/// columns and four dataset-specific columns carry signal of decreasing
/// strength, every other canonical feature is pure noise.
pub fn engineered_csv(which: usize, n: usize, seed: u64) -> String {
    let own: Vec<&str> = match which {
        0 => vec!["Flow Duration", "Flow IAT Mean", "Fwd IAT Total", "Bwd IAT Total"],
        1 => vec!["Total Fwd Packets", "Total Backward Packets", "Flow Bytes/s", "Flow Packets/s"],
        _ => vec!["SYN Flag Count", "ACK Flag Count", "Idle Mean", "Active Mean"],
    };
    let mut rng = seeded(seed ^ (which as u64 + 1) * 7919);
    let names: Vec<&str> = Feature::ALL.iter().map(|f| f.name()).collect();
    let mut s = names.join(",");
    s.push_str(",Label\n");
    for i in 0..n {
        let y = (i % 2) as u8;
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let cells: Vec<String> = names
            .iter()
            .map(|name| {
                let strength = if let Some(k) = UNIVERSAL_SIX.iter().position(|u| u == name) {
                    2.0 - 0.1 * k as f64
                } else if let Some(k) = own.iter().position(|u| u == name) {
                    1.2 - 0.1 * k as f64
                } else {
                    0.0
                };
                let x = sign * strength * 0.5 + normal(&mut rng);
                format!("{x:.6}")
            })
            .collect();
        s.push_str(&cells.join(","));
        s.push_str(if y == 1 { ",Attack\n" } else { ",Normal\n" });
    }
    s
}

/// Central differences of the regularized log-loss.
fn numeric_gradient(obj: &LogisticObjective, w: &[f64], b: f64) -> (Vec<f64>, f64) {
    let h = 1e-5;
    let mut gw = Vec::with_capacity(w.len());
    for j in 0..w.len() {
        let mut up = w.to_vec();
        let mut dn = w.to_vec();
        up[j] += h;
        dn[j] -= h;
        gw.push((obj.loss(&up, b) - obj.loss(&dn, b)) / (2.0 * h));
    }
    let gb = (obj.loss(w, b + h) - obj.loss(w, b - h)) / (2.0 * h);
    (gw, gb)
}

pub fn gradient_agrees(seed: u64) -> Result<(), String> {
    let mut rng = seeded(seed);
    let n = rng.gen_range(3..20);
    let d = rng.gen_range(1..6);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
    let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let w: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let b = normal(&mut rng);
    let obj = LogisticObjective {
        x: &x,
        y: &y,
        l2_lambda: rng.gen_range(0.0..2.0),
    };
    let (aw, ab) = obj.gradient(&w, b);
    let (nw, nb) = numeric_gradient(&obj, &w, b);
    for (a, n) in aw.iter().chain([&ab]).zip(nw.iter().chain([&nb])) {
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
        if rel > 1e-5 {
            return Err(format!("analytic {a} vs numeric {n}"));
        }
    }
    Ok(())
}
