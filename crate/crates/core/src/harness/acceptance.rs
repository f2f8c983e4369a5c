//! The acceptance suite behind `ledbat-sim check`.
//!
//! Each criterion runs its scenarios, compares the measurement with a pinned
//! tolerance and reports one line. Tolerances live in the constants below and
//! are never adjusted to make a run pass.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::SimTime;
use crate::harness::run::{run_scenario, summary_csv, PropertyCounts, RunError, TraceSet};
use crate::harness::scenario::{preset, DeltaT, FlowKind, FlowSpec, Mix, Scenario};
use crate::harness::starvation::{detect_starvation, StarvationParams};
use crate::harness::table1::{find_cell, run_cells, CellResult};
use crate::harness::trace::{mean_over, Entity, Series};
use crate::ledbat::Gain;
use crate::metrics::{jain_fairness, Interval, MetricsReport};

// fig2a
pub const PLATEAU_WINDOW_S: (f64, f64) = (2.0, 4.0);
pub const PLATEAU_QUEUE_PKTS: f64 = 20.8;
pub const PLATEAU_QUEUE_TOL: f64 = 2.0;
pub const FIRST_TCP_LOSS_S: (f64, f64) = (5.0, 8.0);
pub const TCP_HALVED_CWND: f64 = 40.0;
pub const TCP_HALVED_TOL: f64 = 8.0;
pub const FIG2A_FAIRNESS: f64 = 0.65;
pub const FIG2A_FAIRNESS_TOL: f64 = 0.07;
pub const WINDOW_SUM_GAIN_PCT: f64 = 16.0;
pub const WINDOW_SUM_GAIN_TOL: f64 = 6.0;
// fig2b
pub const FIG2B_MIN_FAIRNESS: f64 = 0.99;
pub const FIG2B_ETA_GAP: f64 = 2.0;
// fig3
pub const FIG3_LOSS_WINDOW_S: (f64, f64) = (20.0, 30.0);
pub const FIG3_MID_MIN_FAIRNESS: f64 = 0.8;
pub const FIG3_MID_FROM_S: u64 = 30;
pub const STARVATION_ONSET_S: (f64, f64) = (15.0, 30.0);
/// The episode must last until the history rollover, give or take this.
pub const STARVATION_END_TOL_S: f64 = 10.0;
// grid
pub const T1_LL_NOSS_F: f64 = 0.53;
pub const T1_LL_SS_F: f64 = 0.99;
pub const T1_LL_SS_F_TOL: f64 = 0.02;
pub const T1_F_TOL: f64 = 0.08;
pub const T1_TL_F: f64 = 0.60;
pub const T1_TL_MIN_ETA: f64 = 96.0;
pub const T1_SS_MAX_LOSS: f64 = 5e-3;

/// Deliberate misconfigurations the suite must catch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// LEDBAT gain set to 2/TARGET.
    GainDoubled,
    /// Slow start disabled everywhere.
    NoSlowStart,
}

impl Fault {
    pub fn apply(&self, sc: &mut Scenario) {
        for f in &mut sc.flows {
            match self {
                Fault::None => {}
                Fault::GainDoubled => f.ledbat.gain = Gain {
                    num: 2,
                    den: f.ledbat.target_us,
                },
                Fault::NoSlowStart => f.set_slow_start(false),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub runs: usize,
    pub seed: u64,
    pub jobs: usize,
    pub fault: Fault,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            runs: 20,
            seed: 7,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            fault: Fault::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub measured: String,
    pub expected: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {}: measured {}; expected {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.expected
        )
    }
}

fn crit(id: &'static str, name: &'static str, pass: bool, measured: String, expected: String) -> CriterionResult {
    CriterionResult {
        id,
        name,
        pass,
        measured,
        expected,
    }
}

fn within(x: f64, center: f64, tol: f64) -> bool {
    (x - center).abs() <= tol
}

fn in_range(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}

fn first_of_kind(set: &TraceSet, kind: FlowKind) -> u16 {
    set.flows.iter().find(|f| f.kind == kind).map_or(0, |f| f.flow_id)
}

fn report_over(set: &TraceSet, sc: &Scenario, from: SimTime) -> Result<MetricsReport, RunError> {
    let iv = Interval::new(from, sc.duration)?;
    Ok(MetricsReport::compute(&set.log, &set.flow_ids(), sc.capacity_bps, iv)?)
}

/// Runs the whole suite. Any scenario error is returned; criterion failures
/// are reported in the result list.
pub fn run_acceptance(cfg: &CheckConfig) -> Result<Vec<CriterionResult>, RunError> {
    let mut out = Vec::new();
    let mut props = PropertyCounts::default();
    let scenario = |name: &str| -> Result<Scenario, RunError> {
        let mut sc = preset(name, cfg.seed)?;
        cfg.fault.apply(&mut sc);
        Ok(sc)
    };
    let mut run = |sc: &Scenario| -> Result<(TraceSet, MetricsReport), RunError> {
        let r = run_scenario(sc)?;
        props.add(&r.0.property_counts());
        Ok(r)
    };

    // 1. fig2a
    let fig2a = scenario("fig2a")?;
    let (a, a_report) = run(&fig2a)?;
    out.extend(fig2a_criteria(&fig2a, &a, &a_report));
    let alone = scenario("hs-b40-tcp-alone")?;
    let (solo, _) = run(&alone)?;
    out.push(window_sum_criterion(&fig2a, &a, &solo));

    // 2. fig2b
    let fig2b = scenario("fig2b")?;
    let (_, b_report) = run(&fig2b)?;
    let gap = (b_report.eta_percent - a_report.eta_percent).abs();
    out.push(crit(
        "2",
        "fig2b two LEDBAT flows share fairly and efficiently",
        b_report.fairness > FIG2B_MIN_FAIRNESS && gap <= FIG2B_ETA_GAP,
        format!(
            "F = {:.4}, eta = {:.2}% (fig2a eta {:.2}%, gap {:.2})",
            b_report.fairness, b_report.eta_percent, a_report.eta_percent, gap
        ),
        format!("F > {FIG2B_MIN_FAIRNESS}, eta gap <= {FIG2B_ETA_GAP} points"),
    ));

    // 3. fig3-mid
    let mid = scenario("fig3-mid")?;
    let (m, _) = run(&mid)?;
    let losses: Vec<f64> = m
        .log
        .dropped
        .iter()
        .map(|r| r.at.as_secs_f64())
        .filter(|t| in_range(*t, FIG3_LOSS_WINDOW_S))
        .collect();
    let after = report_over(&m, &mid, SimTime::from_secs(FIG3_MID_FROM_S))?;
    out.push(crit(
        "3",
        "fig3-mid loss resynchronizes the flows",
        !losses.is_empty() && after.fairness > FIG3_MID_MIN_FAIRNESS,
        format!(
            "{} drop(s) in [{}, {}] s (first {}), F over [{FIG3_MID_FROM_S}, 300] s = {:.4}",
            losses.len(),
            FIG3_LOSS_WINDOW_S.0,
            FIG3_LOSS_WINDOW_S.1,
            losses.first().map_or("none".into(), |t| format!("{t:.2} s")),
            after.fairness
        ),
        format!(">= 1 loss in [{}, {}] s, then F > {FIG3_MID_MIN_FAIRNESS}", FIG3_LOSS_WINDOW_S.0, FIG3_LOSS_WINDOW_S.1),
    ));

    // 4. fig3-bottom
    let bottom = scenario("fig3-bottom")?;
    let (bt, _) = run(&bottom)?;
    out.push(starvation_criterion(&bottom, &bt));

    // 5. grid spot cells
    let spot = [
        find_cell(Mix::LedbatLedbat, 10, DeltaT::Fixed(10.0), false),
        find_cell(Mix::TcpLedbat, 2, DeltaT::Fixed(2.0), false),
    ];
    let ss_cells: Vec<_> = [2, 10]
        .into_iter()
        .flat_map(|c| {
            [DeltaT::Fixed(2.0), DeltaT::Fixed(10.0), DeltaT::Uniform(0.0, 10.0)]
                .into_iter()
                .map(move |dt| find_cell(Mix::LedbatLedbat, c, dt, true))
        })
        .collect();
    let cells: Vec<_> = spot.into_iter().chain(ss_cells).map(|c| c.expect("cell exists")).collect();
    let fault = cfg.fault;
    let results = run_cells(&cells, cfg.runs, cfg.seed, cfg.jobs, &move |sc| fault.apply(sc))?;
    for r in &results {
        for d in &r.runs {
            props.add(&d.properties);
        }
    }
    out.extend(table1_criteria(&results));

    // 6. Properties
    out.push(crit(
        "6a",
        "LEDBAT per-ack increment never exceeds 1/cwnd",
        props.ramp_violations == 0,
        format!("{} violating acks", props.ramp_violations),
        "0".into(),
    ));
    out.push(offset_criterion(&scenario("fig3-mid")?, &mut props)?);
    out.push(degeneration_criterion(cfg.fault, &mut props)?);
    out.push(crit(
        "6d",
        "packet conservation at every sample",
        props.conservation_violations == 0,
        format!("{} violating samples", props.conservation_violations),
        "0".into(),
    ));
    out.push(jain_criterion(cfg.seed));
    out.push(crit(
        "6f",
        "cwnd >= 1 at every sample",
        props.cwnd_floor_violations == 0,
        format!("{} violating samples", props.cwnd_floor_violations),
        "0".into(),
    ));
    out.push(crit(
        "6g",
        "successive halvings at least one RTT estimate apart",
        props.halving_gap_violations == 0,
        format!("{} violating halvings", props.halving_gap_violations),
        "0".into(),
    ));

    // 7. Determinism
    out.push(determinism_criterion(&fig2a)?);
    Ok(out)
}

fn fig2a_criteria(sc: &Scenario, set: &TraceSet, report: &MetricsReport) -> Vec<CriterionResult> {
    let tcp = first_of_kind(set, FlowKind::Tcp);
    let ledbat = first_of_kind(set, FlowKind::Ledbat);
    let first_loss = set.log.dropped.first().map(|r| r.at).unwrap_or(sc.duration);
    let peak = set
        .cwnd(ledbat)
        .into_iter()
        .filter(|(t, _)| *t < first_loss)
        .fold(None::<(SimTime, f64)>, |best, s| match best {
            Some(b) if b.1 >= s.1 => Some(b),
            _ => Some(s),
        });
    let queue = set.trace.series(Entity::Link, Series::QueuePkts);
    let (peak_t, peak_q) = match peak {
        Some((t, _)) => (
            t.as_secs_f64(),
            queue.iter().find(|(at, _)| *at == t).map_or(f64::NAN, |(_, q)| *q),
        ),
        None => (f64::NAN, f64::NAN),
    };
    let mut out = vec![crit(
        "1a",
        "fig2a LEDBAT window plateaus at the delay target",
        in_range(peak_t, PLATEAU_WINDOW_S) && within(peak_q, PLATEAU_QUEUE_PKTS, PLATEAU_QUEUE_TOL),
        format!("peak at {peak_t:.2} s with {peak_q:.1} pkts queued"),
        format!(
            "t in [{}, {}] s, {PLATEAU_QUEUE_PKTS} +/- {PLATEAU_QUEUE_TOL} pkts",
            PLATEAU_WINDOW_S.0, PLATEAU_WINDOW_S.1
        ),
    )];

    let tcp_drop = set.drops(tcp).first().map(|t| t.as_secs_f64());
    let halved = set.halvings(tcp).first().map(|(_, w)| *w);
    out.push(crit(
        "1b",
        "fig2a first TCP loss and halving",
        tcp_drop.is_some_and(|t| in_range(t, FIRST_TCP_LOSS_S))
            && halved.is_some_and(|w| within(w, TCP_HALVED_CWND, TCP_HALVED_TOL)),
        format!(
            "first drop at {}, cwnd after halving {}",
            tcp_drop.map_or("never".into(), |t| format!("{t:.2} s")),
            halved.map_or("n/a".into(), |w| format!("{w:.1} pkts"))
        ),
        format!(
            "drop in [{}, {}] s, cwnd {TCP_HALVED_CWND} +/- {TCP_HALVED_TOL} pkts",
            FIRST_TCP_LOSS_S.0, FIRST_TCP_LOSS_S.1
        ),
    ));

    let share = report.rates.iter().map(|r| r.rate_bps).collect::<Vec<_>>();
    out.push(crit(
        "1c",
        "fig2a TCP/LEDBAT fairness over [0, 300] s",
        within(report.fairness, FIG2A_FAIRNESS, FIG2A_FAIRNESS_TOL),
        format!(
            "F = {:.4} (rates {})",
            report.fairness,
            share.iter().map(|r| format!("{:.3} Mbps", r / 1e6)).collect::<Vec<_>>().join(" / ")
        ),
        format!("{FIG2A_FAIRNESS} +/- {FIG2A_FAIRNESS_TOL}"),
    ));
    out
}

/// The sum of both windows stands in for instantaneous link use; compare its
/// time average with the window of TCP running alone.
fn window_sum_criterion(sc: &Scenario, both: &TraceSet, solo: &TraceSet) -> CriterionResult {
    let end = sc.duration;
    let mut sum = 0.0;
    let mut n = 0usize;
    let series: Vec<_> = both.flows.iter().map(|f| both.cwnd(f.flow_id)).collect();
    if let Some(first) = series.first() {
        for (k, (t, _)) in first.iter().enumerate() {
            if series.iter().all(|s| s.get(k).is_some_and(|(u, _)| u == t)) {
                sum += series.iter().map(|s| s[k].1).sum::<f64>();
                n += 1;
            }
        }
    }
    let both_mean = sum / n.max(1) as f64;
    let solo_mean = mean_over(&solo.cwnd(1), SimTime::ZERO, end).unwrap_or(f64::NAN);
    let gain = (both_mean / solo_mean - 1.0) * 100.0;
    crit(
        "1d",
        "fig2a window sum above TCP alone",
        within(gain, WINDOW_SUM_GAIN_PCT, WINDOW_SUM_GAIN_TOL),
        format!("+{gain:.1}% (mean sum {both_mean:.2} vs TCP alone {solo_mean:.2} pkts)"),
        format!("+{WINDOW_SUM_GAIN_PCT}% +/- {WINDOW_SUM_GAIN_TOL}"),
    )
}

fn starvation_criterion(sc: &Scenario, set: &TraceSet) -> CriterionResult {
    let history = sc
        .flows
        .iter()
        .filter(|f| f.kind == FlowKind::Ledbat)
        .map(|f| f.ledbat.base_histo_minutes)
        .min()
        .unwrap_or(2);
    let rollover = (history as f64 * 60.0).min(sc.duration.as_secs_f64());
    let early_drops = set
        .log
        .dropped
        .iter()
        .filter(|r| r.at.as_secs_f64() < rollover)
        .count();
    let episodes = detect_starvation(set, sc.capacity_bps, &StarvationParams::default()).unwrap_or_default();
    let ep = episodes.iter().find(|e| e.flow_id == 1);
    let pass = early_drops == 0
        && ep.is_some_and(|e| {
            in_range(e.start.as_secs_f64(), STARVATION_ONSET_S)
                && within(e.end.as_secs_f64(), rollover, STARVATION_END_TOL_S)
        });
    crit(
        "4",
        "fig3-bottom late comer starves flow 1 until the history rolls over",
        pass,
        format!(
            "{early_drops} drop(s) before {rollover:.0} s; flow 1 episode {}",
            ep.map_or("none".into(), |e| format!(
                "[{:.0}, {:.0}] s",
                e.start.as_secs_f64(),
                e.end.as_secs_f64()
            ))
        ),
        format!(
            "0 drops; episode from [{}, {}] s to {rollover:.0} +/- {STARVATION_END_TOL_S} s",
            STARVATION_ONSET_S.0, STARVATION_ONSET_S.1
        ),
    )
}

fn table1_criteria(results: &[CellResult]) -> Vec<CriterionResult> {
    let cell = |mix, c, dt, ss| {
        results
            .iter()
            .find(|r| r.cell.mix == mix && r.cell.capacity_mbps == c && r.cell.delta_t == dt && r.cell.slow_start == ss)
            .expect("cell was run")
    };
    let noss = cell(Mix::LedbatLedbat, 10, DeltaT::Fixed(10.0), false);
    let ss = cell(Mix::LedbatLedbat, 10, DeltaT::Fixed(10.0), true);
    let tl = cell(Mix::TcpLedbat, 2, DeltaT::Fixed(2.0), false);
    let runs = noss.aggregate.runs;
    let mut out = vec![
        crit(
            "5a",
            "grid LEDBAT-LEDBAT C=10 B=50 dT=10 without slow start",
            within(noss.aggregate.fairness.mean, T1_LL_NOSS_F, T1_F_TOL),
            format!("F = {:.4} +/- {:.4} over {runs} runs", noss.aggregate.fairness.mean, noss.aggregate.fairness.std),
            format!("{T1_LL_NOSS_F} +/- {T1_F_TOL}"),
        ),
        crit(
            "5b",
            "grid LEDBAT-LEDBAT C=10 B=50 dT=10 with slow start",
            within(ss.aggregate.fairness.mean, T1_LL_SS_F, T1_LL_SS_F_TOL),
            format!("F = {:.4} +/- {:.4} over {runs} runs", ss.aggregate.fairness.mean, ss.aggregate.fairness.std),
            format!("{T1_LL_SS_F} +/- {T1_LL_SS_F_TOL}"),
        ),
        crit(
            "5c",
            "grid TCP-LEDBAT C=2 B=10 dT=2 without slow start",
            tl.aggregate.eta.mean >= T1_TL_MIN_ETA && within(tl.aggregate.fairness.mean, T1_TL_F, T1_F_TOL),
            format!("eta = {:.2}%, F = {:.4}", tl.aggregate.eta.mean, tl.aggregate.fairness.mean),
            format!("eta >= {T1_TL_MIN_ETA}%, F = {T1_TL_F} +/- {T1_F_TOL}"),
        ),
    ];
    let with_ss: Vec<&CellResult> = results
        .iter()
        .filter(|r| r.cell.slow_start && r.cell.mix == Mix::LedbatLedbat)
        .collect();
    let worst = with_ss
        .iter()
        .max_by(|a, b| a.aggregate.loss_rate.mean.total_cmp(&b.aggregate.loss_rate.mean))
        .expect("slow-start cells were run");
    out.push(crit(
        "5d",
        "grid LEDBAT-LEDBAT loss rates with slow start",
        with_ss.iter().all(|r| r.aggregate.loss_rate.mean <= T1_SS_MAX_LOSS),
        format!(
            "worst L = {:.2e} (C={} dT={}) over {} cells",
            worst.aggregate.loss_rate.mean,
            worst.cell.capacity_mbps,
            worst.cell.delta_t.label(),
            with_ss.len()
        ),
        format!("every cell <= {T1_SS_MAX_LOSS:.0e}"),
    ));
    out
}

/// Everything except the absolute base delay must be identical when clocks
/// are shifted.
fn comparable(set: &TraceSet) -> Vec<(SimTime, Entity, Series, u64)> {
    set.trace
        .rows
        .iter()
        .filter(|r| r.series != Series::BaseDelayUs)
        .map(|r| (r.t, r.entity, r.series, r.value.to_bits()))
        .collect()
}

fn offset_criterion(base: &Scenario, props: &mut PropertyCounts) -> Result<CriterionResult, RunError> {
    let (reference, _) = run_scenario(base)?;
    let reference_rows = comparable(&reference);
    let mut mismatches = Vec::new();
    for off in [1_000_000i64, -1_000_000, 3_600_000_000, -3_600_000_000] {
        let mut sc = base.clone();
        for (i, f) in sc.flows.iter_mut().enumerate() {
            // shift the receiver, and also the sender of every other flow
            f.ledbat.clock_offset_us = off;
            if i % 2 == 1 {
                f.sender_clock_offset_us = -off / 2;
            }
        }
        let (set, _) = run_scenario(&sc)?;
        props.add(&set.property_counts());
        if comparable(&set) != reference_rows || set.log != reference.log {
            mismatches.push(off);
        }
    }
    Ok(crit(
        "6b",
        "traces unchanged by clock offsets of +/-1 s and +/-1 h",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "4 of 4 offsets identical".into()
        } else {
            format!("differences at offsets {mismatches:?} us")
        },
        "bit-identical traces".into(),
    ))
}

fn degeneration_criterion(fault: Fault, props: &mut PropertyCounts) -> Result<CriterionResult, RunError> {
    let mut pinned = FlowSpec::ledbat(0.0);
    pinned.ledbat.pin_queuing_delay_to_zero = true;
    pinned.ledbat.pacing = false;
    let mut ledbat = Scenario {
        name: "pinned-ledbat".into(),
        flows: vec![pinned],
        ..Default::default()
    };
    fault.apply(&mut ledbat);
    let tcp = Scenario {
        name: "tcp-ca".into(),
        flows: vec![FlowSpec::tcp(0.0)],
        ..Default::default()
    };
    let (l, _) = run_scenario(&ledbat)?;
    let (t, _) = run_scenario(&tcp)?;
    props.add(&l.property_counts());
    props.add(&t.property_counts());
    let bits = |s: &TraceSet| s.cwnd(1).into_iter().map(|(t, w)| (t, w.to_bits())).collect::<Vec<_>>();
    let (lw, tw) = (bits(&l), bits(&t));
    let first_diff = lw.iter().zip(&tw).position(|(a, b)| a != b);
    let same = first_diff.is_none() && lw.len() == tw.len() && l.log == t.log;
    Ok(crit(
        "6c",
        "LEDBAT with zero queuing delay follows TCP congestion avoidance",
        same,
        match first_diff {
            None if same => format!("{} cwnd samples identical", lw.len()),
            None => "cwnd identical but packet logs differ".into(),
            Some(k) => format!("first difference at {}", lw[k].0),
        },
        "bit-identical cwnd trajectory".into(),
    ))
}

fn jain_criterion(seed: u64) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=16usize);
        let mut xs: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1e7) })
            .collect();
        if xs.iter().all(|x| *x == 0.0) {
            xs[0] = 1.0;
        }
        let k: f64 = rng.gen_range(1e-3..1e3);
        let f = jain_fairness(&xs).expect("non-zero vector");
        let g = jain_fairness(&xs.iter().map(|x| x * k).collect::<Vec<_>>()).expect("non-zero vector");
        let lo = 1.0 / n as f64;
        if !(f >= lo * (1.0 - 1e-12) && f <= 1.0 + 1e-12 && (f - g).abs() <= 1e-12 * f) {
            bad += 1;
        }
    }
    crit(
        "6e",
        "Jain index scale invariance and 1/N..1 bounds",
        bad == 0,
        format!("{bad} of 10000 random vectors out of bounds"),
        "0".into(),
    )
}

fn determinism_criterion(sc: &Scenario) -> Result<CriterionResult, RunError> {
    let render = || -> Result<(Vec<u8>, String), RunError> {
        let (set, report) = run_scenario(sc)?;
        let mut trace = Vec::new();
        set.trace.write_csv(&mut trace).expect("writing to memory");
        Ok((trace, summary_csv(sc, &set, &report)))
    };
    let (t1, s1) = render()?;
    let (t2, s2) = render()?;
    Ok(crit(
        "7",
        "identical seeds give byte-identical trace and summary",
        t1 == t2 && s1 == s2,
        format!("{} trace bytes, {}", t1.len(), if t1 == t2 && s1 == s2 { "identical" } else { "different" }),
        "identical".into(),
    ))
}

pub fn all_passed(results: &[CriterionResult]) -> bool {
    results.iter().all(|r| r.pass)
}
