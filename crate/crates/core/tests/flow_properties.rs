mod common;

use std::net::IpAddr;

use botflow::flow::{ingest_reader, Feature, FeatureVector, MeterConfig};
use botflow::synth::{generate_synthetic_capture, FlowBlueprint};
use common::*;
use proptest::prelude::*;

fn meter(bps: &[FlowBlueprint], cfg: &MeterConfig) -> Vec<FeatureVector> {
    let bytes = generate_synthetic_capture(bps, 1).unwrap();
    ingest_reader(bytes.as_slice(), cfg).unwrap().flows
}

#[test]
fn matches_oracle_on_random_captures() {
    for seed in 0..40 {
        let mut rng = seeded(seed);
        let bps = random_blueprints(&mut rng, 300);
        let cfg = random_meter(&mut rng);
        if let Err(e) = compare_flows(meter(&bps, &cfg), oracle_flows(&bps, &cfg)) {
            panic!("seed {seed}: {e}");
        }
    }
}

#[test]
fn matches_oracle_with_default_timeouts() {
    for seed in 100..110 {
        let mut rng = seeded(seed);
        let mut bps = random_blueprints(&mut rng, 200);
        // stretch some gaps past the default two-minute timeout
        for bp in &mut bps {
            for p in bp.packets.iter_mut().skip(1).step_by(7) {
                p.gap_us *= 40;
            }
        }
        let cfg = MeterConfig::default();
        compare_flows(meter(&bps, &cfg), oracle_flows(&bps, &cfg)).unwrap();
    }
}

fn by_start(mut v: Vec<FeatureVector>) -> Vec<FeatureVector> {
    sort_flows(&mut v);
    v
}

fn swap_hosts(ip: IpAddr, a: IpAddr, b: IpAddr) -> IpAddr {
    if ip == a {
        b
    } else if ip == b {
        a
    } else {
        ip
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn time_shift_only_moves_timestamps(seed in 0u64..10_000, shift in 0i64..1_000_000_000_000) {
        let mut rng = seeded(seed);
        let bps = random_blueprints(&mut rng, 120);
        let cfg = random_meter(&mut rng);
        let mut shifted = bps.clone();
        for bp in &mut shifted {
            bp.start_us += shift;
        }
        let a = by_start(meter(&bps, &cfg));
        let b = by_start(meter(&shifted, &cfg));
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.timestamp_us + shift, y.timestamp_us);
            prop_assert_eq!(&x.flow_id, &y.flow_id);
            prop_assert_eq!(x.values, y.values);
        }
    }

    #[test]
    fn doubling_time_scales_durations(seed in 0u64..10_000) {
        use Feature::*;
        let mut rng = seeded(seed);
        let bps = random_blueprints(&mut rng, 120);
        let cfg = random_meter(&mut rng);
        let mut slow = bps.clone();
        for bp in &mut slow {
            bp.start_us *= 2;
            for p in &mut bp.packets {
                p.gap_us *= 2;
            }
        }
        let slow_cfg = MeterConfig {
            flow_timeout_us: cfg.flow_timeout_us * 2,
            activity_timeout_us: cfg.activity_timeout_us * 2,
            ..cfg.clone()
        };
        let a = by_start(meter(&bps, &cfg));
        let b = by_start(meter(&slow, &slow_cfg));
        prop_assert_eq!(a.len(), b.len());
        let timed = [
            FlowDuration, FlowIatMean, FlowIatStd, FlowIatMax, FlowIatMin, FwdIatTotal, FwdIatMean,
            FwdIatStd, FwdIatMax, FwdIatMin, BwdIatTotal, BwdIatMean, BwdIatStd, BwdIatMax, BwdIatMin,
            ActiveMean, ActiveStd, ActiveMax, ActiveMin, IdleMean, IdleStd, IdleMax, IdleMin,
        ];
        let rates = [FlowBytesPerSec, FlowPacketsPerSec, FwdPacketsPerSec, BwdPacketsPerSec];
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.flow_id, &y.flow_id);
            prop_assert_eq!(2 * x.timestamp_us, y.timestamp_us);
            for &f in Feature::ALL {
                let (u, v) = (x[f], y[f]);
                let ok = if timed.contains(&f) {
                    close(2.0 * u, v)
                } else if rates.contains(&f) {
                    close(u, 2.0 * v)
                } else {
                    u == v
                };
                prop_assert!(ok, "{}: {} vs {}", f.name(), u, v);
            }
        }
    }

    #[test]
    fn packets_and_bytes_are_conserved(seed in 0u64..10_000) {
        use Feature::*;
        let mut rng = seeded(seed);
        let bps = random_blueprints(&mut rng, 200);
        let cfg = random_meter(&mut rng);
        let flows = meter(&bps, &cfg);
        let pkts: usize = bps.iter().map(|b| b.packets.len()).sum();
        let bytes: f64 = bps.iter().flat_map(|b| &b.packets).map(|p| p.payload_len as f64).sum();
        let got_pkts: f64 = flows.iter().map(|f| f[TotalFwdPackets] + f[TotalBwdPackets]).sum();
        let got_bytes: f64 = flows.iter().map(|f| f[TotalLenFwd] + f[TotalLenBwd]).sum();
        prop_assert_eq!(got_pkts, pkts as f64);
        prop_assert_eq!(got_bytes, bytes);
        for f in &flows {
            prop_assert!(f[TotalFwdPackets] >= 1.0);
            prop_assert!(f[FlowDuration] >= 0.0);
            prop_assert!(f[MinPacketLen] <= f[PacketLenMean] + 1e-9);
            prop_assert!(f[PacketLenMean] <= f[MaxPacketLen] + 1e-9);
        }
    }

    #[test]
    fn swapping_host_addresses_keeps_statistics(seed in 0u64..10_000) {
        let mut rng = seeded(seed);
        let bps = random_blueprints(&mut rng, 150);
        let cfg = random_meter(&mut rng);
        let (a, b) = (bps[0].client.0, bps[0].server.0);
        let mut swapped = bps.clone();
        for bp in &mut swapped {
            bp.client.0 = swap_hosts(bp.client.0, a, b);
            bp.server.0 = swap_hosts(bp.server.0, a, b);
        }
        let mut expect = meter(&bps, &cfg);
        for f in &mut expect {
            f.src_ip = swap_hosts(f.src_ip, a, b);
            f.dst_ip = swap_hosts(f.dst_ip, a, b);
            f.flow_id = botflow::flow::flow_id((f.src_ip, f.src_port), (f.dst_ip, f.dst_port), f.protocol);
        }
        let expect = by_start(expect);
        let got = by_start(meter(&swapped, &cfg));
        prop_assert_eq!(expect.len(), got.len());
        for (x, y) in expect.iter().zip(&got) {
            prop_assert_eq!(&x.flow_id, &y.flow_id);
            for &f in Feature::ALL {
                if f != Feature::Inbound {
                    prop_assert_eq!(x[f], y[f], "{}", f.name());
                }
            }
        }
    }
}
