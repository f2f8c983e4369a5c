use ledbat_sim::engine::SimTime;
use ledbat_sim::harness::scenario::{preset, FlowSpec, Scenario};
use ledbat_sim::harness::trace::Series;
use ledbat_sim::harness::{run_scenario, PropertyCounts, TraceSet};
use ledbat_sim::ledbat::Gain;
use proptest::prelude::*;

fn shortened(name: &str, secs: u64) -> Scenario {
    let mut sc = preset(name, 3).unwrap();
    sc.duration = SimTime::from_secs(secs);
    sc
}

fn rows_without_base(set: &TraceSet) -> Vec<(SimTime, String, Series, u64)> {
    set.trace
        .rows
        .iter()
        .filter(|r| r.series != Series::BaseDelayUs)
        .map(|r| (r.t, r.entity.to_string(), r.series, r.value.to_bits()))
        .collect()
}

#[test]
fn receiver_clock_offset_leaves_traces_unchanged() {
    for name in ["fig2a", "fig3-mid", "fig3-bottom"] {
        let base = shortened(name, 150);
        let (reference, _) = run_scenario(&base).unwrap();
        for off in [1_000_000i64, -1_000_000, 3_600_000_000, -3_600_000_000] {
            let mut sc = base.clone();
            for f in &mut sc.flows {
                f.ledbat.clock_offset_us = off;
            }
            let (set, _) = run_scenario(&sc).unwrap();
            assert_eq!(rows_without_base(&set), rows_without_base(&reference), "{name} offset {off}");
            assert_eq!(set.log, reference.log);
            // the absolute base delay moves by exactly the offset
            let shifted = set.trace.rows.iter().filter(|r| r.series == Series::BaseDelayUs);
            let orig = reference.trace.rows.iter().filter(|r| r.series == Series::BaseDelayUs);
            for (a, b) in shifted.zip(orig) {
                assert_eq!(a.value - b.value, off as f64);
            }
        }
    }
}

#[test]
fn sender_clock_offset_leaves_traces_unchanged() {
    let base = shortened("fig3-mid", 60);
    let (reference, _) = run_scenario(&base).unwrap();
    for off in [1_000_000i64, -3_600_000_000] {
        let mut sc = base.clone();
        for f in &mut sc.flows {
            f.sender_clock_offset_us = off;
        }
        let (set, _) = run_scenario(&sc).unwrap();
        assert_eq!(set.trace, reference.trace, "offset {off}");
    }
}

#[test]
fn pinned_ledbat_matches_tcp_congestion_avoidance() {
    for (capacity, buffer) in [(10_000_000, 40), (2_000_000, 10), (500_000, 10)] {
        let mut ledbat = FlowSpec::ledbat(0.0);
        ledbat.ledbat.pin_queuing_delay_to_zero = true;
        ledbat.ledbat.pacing = false;
        let mk = |flow| Scenario {
            capacity_bps: capacity,
            buffer_pkts: buffer,
            duration: SimTime::from_secs(120),
            flows: vec![flow],
            ..Default::default()
        };
        let (l, lr) = run_scenario(&mk(ledbat)).unwrap();
        let (t, tr) = run_scenario(&mk(FlowSpec::tcp(0.0))).unwrap();
        let bits = |s: &TraceSet| s.cwnd(1).into_iter().map(|(t, w)| (t, w.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&l), bits(&t), "C={capacity}");
        assert_eq!(l.log, t.log);
        assert_eq!(lr, tr);
        assert!(!l.drops(1).is_empty(), "the comparison should cover loss reactions");
    }
}

#[test]
fn invariants_hold_on_every_preset() {
    for name in ledbat_sim::harness::scenario::PRESETS {
        let sc = shortened(name, 120);
        let (set, report) = run_scenario(&sc).unwrap();
        let p = set.property_counts();
        assert_eq!(p, PropertyCounts::default(), "{name}: {p:?}");
        assert!(report.fairness >= 1.0 / set.flows.len() as f64 - 1e-12);
        // a packet already in service when the interval opens counts whole
        let one_pkt = (sc.packet_bytes * 8) as f64 / (sc.capacity_bps as f64 * report.interval.secs()) * 100.0;
        assert!(report.eta_percent <= 100.0 + one_pkt + 1e-9, "{name}: {}", report.eta_percent);
    }
}

#[test]
fn doubled_gain_is_caught_by_the_ramp_counter() {
    let mut sc = shortened("fig2b", 30);
    for f in &mut sc.flows {
        f.ledbat.gain = Gain { num: 2, den: 25_000 };
    }
    let (set, _) = run_scenario(&sc).unwrap();
    assert!(set.property_counts().ramp_violations > 0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn random_scenarios_respect_invariants(
        capacity in prop::sample::select(vec![500_000u64, 2_000_000, 10_000_000]),
        buffer in 1usize..120,
        kinds in prop::collection::vec(any::<bool>(), 1..4),
        starts in prop::collection::vec(0.0f64..8.0, 4),
        slow_start in any::<bool>(),
        pacing in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let flows = kinds
            .iter()
            .zip(&starts)
            .map(|(&ledbat, &s)| {
                let mut f = if ledbat { FlowSpec::ledbat(s) } else { FlowSpec::tcp(s) };
                f.set_slow_start(slow_start);
                f.ledbat.pacing = pacing;
                f
            })
            .collect();
        let sc = Scenario {
            capacity_bps: capacity,
            buffer_pkts: buffer,
            duration: SimTime::from_secs(20),
            flows,
            seed,
            ..Default::default()
        };
        let (set, report) = run_scenario(&sc).unwrap();
        let p = set.property_counts();
        prop_assert_eq!(p, PropertyCounts::default());
        let c = set.log.offered.len();
        prop_assert!(set.log.dropped.len() + set.log.departed.len() <= c);
        prop_assert!(report.loss_rate >= 0.0 && report.loss_rate <= 1.0);
    }
}
