//! Wires senders, receivers, the bottleneck and the return path into one
//! event-driven simulation and records what happened.

use thiserror::Error;

use crate::engine::{Event, EventHandle, RunSummary, Scheduler, SimTime};
use crate::harness::scenario::{FlowKind, Scenario, ScenarioError};
use crate::harness::trace::{Entity, Series, Trace};
use crate::ledbat::{Ledbat, LedbatStats};
use crate::metrics::{Interval, LinkLog, LinkRecord, MetricsError, MetricsReport};
use crate::network::{AckPath, Bottleneck, EnqueueOutcome, FlowId, Packet};
use crate::tcp::Tcp;
use crate::transport::{AckOutcome, Controller, LossEvent, Receiver, Sender, SenderStats};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    /// A data packet reaches its receiver or an ack reaches its sender.
    PacketArrival(Packet),
    LinkServiceDone,
    PacingTimer(usize),
    SafetyTimeout(usize),
    FlowStart(usize),
    StatsSample,
    SimEnd,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub flow_id: FlowId,
    pub kind: FlowKind,
    pub start: SimTime,
    pub sender: SenderStats,
    pub ledbat: Option<LedbatStats>,
    pub bytes_delivered: u64,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct TraceSet {
    pub scenario: String,
    pub starts: Vec<SimTime>,
    pub trace: Trace,
    pub log: LinkLog,
    pub flows: Vec<FlowOutcome>,
    pub summary: RunSummary,
    /// Samples where the link broke `offered = delivered + dropped + backlog`.
    pub conservation_violations: u64,
    /// Samples where some window was below one packet.
    pub cwnd_floor_violations: u64,
}

impl TraceSet {
    pub fn flow_ids(&self) -> Vec<FlowId> {
        self.flows.iter().map(|f| f.flow_id).collect()
    }

    pub fn cwnd(&self, flow_id: FlowId) -> Vec<(SimTime, f64)> {
        self.trace.series(Entity::Flow(flow_id), Series::CwndPkts)
    }

    pub fn queue_delay_us(&self) -> Vec<(SimTime, f64)> {
        self.trace.series(Entity::Link, Series::QueueDelayUs)
    }

    /// Times of packets of `flow_id` dropped at the bottleneck.
    pub fn drops(&self, flow_id: FlowId) -> Vec<SimTime> {
        self.log
            .dropped
            .iter()
            .filter(|r| r.flow_id == flow_id)
            .map(|r| r.at)
            .collect()
    }

    pub fn halvings(&self, flow_id: FlowId) -> Vec<(SimTime, f64)> {
        self.trace.series(Entity::Flow(flow_id), Series::Halving)
    }

    pub fn property_counts(&self) -> PropertyCounts {
        let mut p = PropertyCounts {
            conservation_violations: self.conservation_violations,
            cwnd_floor_violations: self.cwnd_floor_violations,
            ..Default::default()
        };
        for f in &self.flows {
            p.ramp_violations += f.ledbat.as_ref().map_or(0, |l| l.ramp_violations);
            p.window_overruns += f.sender.window_overruns;
            p.halving_gap_violations += f
                .sender
                .halvings
                .windows(2)
                .filter(|w| (w[1].0 - w[0].0).as_micros() < w[1].1)
                .count() as u64;
        }
        p
    }
}

/// Per-run tallies of invariant violations. All zero in a healthy run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PropertyCounts {
    /// LEDBAT acks whose window increment exceeded `1/cwnd`.
    pub ramp_violations: u64,
    pub conservation_violations: u64,
    pub cwnd_floor_violations: u64,
    /// Consecutive halvings of one flow closer together than its RTT estimate.
    pub halving_gap_violations: u64,
    /// Sends that left more than `ceil(cwnd)` packets outstanding.
    pub window_overruns: u64,
}

impl PropertyCounts {
    pub fn add(&mut self, o: &PropertyCounts) {
        self.ramp_violations += o.ramp_violations;
        self.conservation_violations += o.conservation_violations;
        self.cwnd_floor_violations += o.cwnd_floor_violations;
        self.halving_gap_violations += o.halving_gap_violations;
        self.window_overruns += o.window_overruns;
    }
}

struct FlowState {
    sender: Sender,
    receiver: Receiver,
    started: bool,
    pacing_timer: Option<EventHandle>,
    safety_timer: Option<EventHandle>,
    bytes_delivered: u64,
}

struct World {
    link: Bottleneck,
    ack_path: AckPath,
    flows: Vec<FlowState>,
    log: LinkLog,
    trace: Trace,
    end: SimTime,
    sample_interval: SimTime,
    conservation_violations: u64,
    cwnd_floor_violations: u64,
    out: Vec<Packet>,
}

fn index_of(flow_id: FlowId) -> usize {
    flow_id as usize - 1
}

impl World {
    fn new(sc: &Scenario) -> Self {
        let flows = sc
            .flows
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let flow_id = (i + 1) as FlowId;
                let (controller, rx_offset) = match spec.kind {
                    FlowKind::Ledbat => (
                        Controller::Ledbat(Ledbat::new(spec.ledbat.clone())),
                        spec.ledbat.clock_offset_us,
                    ),
                    FlowKind::Tcp => (Controller::Tcp(Tcp::new(spec.tcp)), 0),
                };
                FlowState {
                    sender: Sender::new(
                        flow_id,
                        sc.packet_bytes,
                        spec.sender_clock_offset_us,
                        sc.rtt_base_us,
                        controller,
                    ),
                    receiver: Receiver::new(flow_id, spec.sender_clock_offset_us + rx_offset),
                    started: false,
                    pacing_timer: None,
                    safety_timer: None,
                    bytes_delivered: 0,
                }
            })
            .collect();
        World {
            link: Bottleneck::new(sc.capacity_bps, sc.data_prop_delay(), sc.buffer_pkts),
            ack_path: AckPath {
                delay: sc.ack_delay(),
            },
            flows,
            log: LinkLog::default(),
            trace: Trace::default(),
            end: sc.duration,
            sample_interval: sc.sample_interval,
            conservation_violations: 0,
            cwnd_floor_violations: 0,
            out: Vec::new(),
        }
    }

    fn handle(&mut self, sched: &mut Scheduler<SimEvent>, ev: Event<SimEvent>) {
        let now = ev.fire_at;
        match ev.payload {
            SimEvent::FlowStart(i) => {
                self.flows[i].started = true;
                let wake = self.flows[i].sender.try_send(now, &mut self.out);
                self.after_flow_event(sched, i, now, wake, true);
            }
            SimEvent::PacketArrival(pkt) if pkt.is_ack => {
                let i = index_of(pkt.flow_id);
                let AckOutcome {
                    progressed,
                    loss,
                    wake_at,
                } = self.flows[i].sender.on_ack(&pkt, now, &mut self.out);
                if let Some(loss) = loss {
                    self.record_loss(i, &loss);
                }
                self.after_flow_event(sched, i, now, wake_at, progressed);
            }
            SimEvent::PacketArrival(pkt) => {
                let rx = &mut self.flows[index_of(pkt.flow_id)].receiver;
                let ack = rx.on_data(&pkt, rx.local_clock(now));
                self.schedule(sched, self.ack_path.deliver_at(now), SimEvent::PacketArrival(ack));
            }
            SimEvent::LinkServiceDone => {
                let dep = self.link.service_complete(now);
                self.log.departed.push(LinkRecord {
                    at: now,
                    flow_id: dep.packet.flow_id,
                    bytes: dep.packet.size_bytes,
                });
                self.flows[index_of(dep.packet.flow_id)].bytes_delivered += dep.packet.size_bytes as u64;
                if let Some(done) = dep.next_service_done_at {
                    self.schedule(sched, done, SimEvent::LinkServiceDone);
                }
                self.schedule(sched, dep.deliver_at, SimEvent::PacketArrival(dep.packet));
            }
            SimEvent::PacingTimer(i) => {
                self.flows[i].pacing_timer = None;
                let wake = self.flows[i].sender.try_send(now, &mut self.out);
                self.after_flow_event(sched, i, now, wake, false);
            }
            SimEvent::SafetyTimeout(i) => {
                self.flows[i].safety_timer = None;
                if let Some(loss) = self.flows[i].sender.on_safety_timeout(now, &mut self.out) {
                    self.trace.push(now, Entity::Flow(i as FlowId + 1), Series::Timeout, 1.0);
                    self.record_loss(i, &loss);
                }
                let wake = self.flows[i].sender.try_send(now, &mut self.out);
                self.after_flow_event(sched, i, now, wake, true);
            }
            SimEvent::StatsSample => {
                self.sample(now);
                let next = now + self.sample_interval;
                if next <= self.end {
                    self.schedule(sched, next, SimEvent::StatsSample);
                }
            }
            SimEvent::SimEnd => {}
        }
    }

    fn schedule(&self, sched: &mut Scheduler<SimEvent>, at: SimTime, ev: SimEvent) -> EventHandle {
        sched.schedule(at, ev).expect("events are never scheduled in the past")
    }

    fn record_loss(&mut self, i: usize, loss: &LossEvent) {
        if loss.halved {
            self.trace
                .push(loss.at, Entity::Flow(i as FlowId + 1), Series::Halving, loss.cwnd_after);
        }
    }

    /// Pushes freshly emitted packets into the bottleneck, then re-arms the
    /// pacing and safety timers of flow `i`.
    fn after_flow_event(
        &mut self,
        sched: &mut Scheduler<SimEvent>,
        i: usize,
        now: SimTime,
        wake: Option<SimTime>,
        progressed: bool,
    ) {
        let out = std::mem::take(&mut self.out);
        for pkt in &out {
            self.offer(sched, pkt.clone(), now);
        }
        self.out = out;
        self.out.clear();

        if let Some(at) = wake {
            let f = &mut self.flows[i];
            let keep = f.pacing_timer.is_some_and(|h| h.fire_at() == at && sched.is_pending(h));
            if !keep {
                if let Some(h) = f.pacing_timer.take() {
                    sched.cancel(h);
                }
                let h = sched.schedule(at, SimEvent::PacingTimer(i)).expect("pacer wakes in the future");
                self.flows[i].pacing_timer = Some(h);
            }
        }

        let f = &mut self.flows[i];
        if f.sender.has_outstanding() {
            if progressed || f.safety_timer.is_none() {
                if let Some(h) = f.safety_timer.take() {
                    sched.cancel(h);
                }
                let h = sched.schedule_in(f.sender.safety_timeout(), SimEvent::SafetyTimeout(i));
                self.flows[i].safety_timer = Some(h);
            }
        } else if let Some(h) = f.safety_timer.take() {
            sched.cancel(h);
        }
    }

    fn offer(&mut self, sched: &mut Scheduler<SimEvent>, pkt: Packet, now: SimTime) {
        let rec = LinkRecord {
            at: now,
            flow_id: pkt.flow_id,
            bytes: pkt.size_bytes,
        };
        self.log.offered.push(rec);
        let seq = pkt.seq;
        match self.link.enqueue(pkt, now) {
            EnqueueOutcome::Accepted {
                service_done_at: Some(done),
            } => {
                self.schedule(sched, done, SimEvent::LinkServiceDone);
            }
            EnqueueOutcome::Accepted { service_done_at: None } => {}
            EnqueueOutcome::Dropped => {
                self.log.dropped.push(rec);
                self.trace.push(now, Entity::Flow(rec.flow_id), Series::Drop, seq as f64);
            }
        }
    }

    fn sample(&mut self, now: SimTime) {
        if !self.link.conserves_packets() {
            self.conservation_violations += 1;
        }
        self.trace
            .push(now, Entity::Link, Series::QueuePkts, self.link.queue_len() as f64);
        self.trace.push(
            now,
            Entity::Link,
            Series::QueueDelayUs,
            self.link.queuing_delay_now(now).as_micros() as f64,
        );
        for (i, f) in self.flows.iter().enumerate() {
            if !f.started {
                continue;
            }
            let e = Entity::Flow(i as FlowId + 1);
            let cwnd = f.sender.cwnd();
            if cwnd < 1.0 {
                self.cwnd_floor_violations += 1;
            }
            self.trace.push(now, e, Series::CwndPkts, cwnd);
            self.trace.push(now, e, Series::Delivery, f.bytes_delivered as f64);
            if let Some(l) = f.sender.controller().as_ledbat() {
                if let Some(b) = l.base_delay_us() {
                    self.trace.push(now, e, Series::BaseDelayUs, b as f64);
                }
                if let Some(q) = l.queuing_delay_us() {
                    self.trace.push(now, e, Series::QueuingEstUs, q as f64);
                }
            }
        }
    }
}

pub const SUMMARY_HEADER: &str =
    "scenario,seed,flow_id,kind,start_s,interval_start_s,interval_end_s,rate_bps,eta_percent,fairness,loss_rate";

/// One row per flow; the link-wide metrics repeat on every row.
pub fn summary_csv(sc: &Scenario, set: &TraceSet, report: &MetricsReport) -> String {
    let mut s = String::new();
    s.push_str(SUMMARY_HEADER);
    s.push('\n');
    for (f, r) in set.flows.iter().zip(&report.rates) {
        s.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.1},{:.4},{:.6},{:.6e}\n",
            sc.name,
            sc.seed,
            f.flow_id,
            f.kind.as_str(),
            f.start.as_secs_f64(),
            report.interval.start.as_secs_f64(),
            report.interval.end.as_secs_f64(),
            r.rate_bps,
            report.eta_percent,
            report.fairness,
            report.loss_rate
        ));
    }
    s
}

/// Runs the scenario to completion. Metrics cover the interval from the
/// latest flow start to the end of the run.
pub fn run_scenario(sc: &Scenario) -> Result<(TraceSet, MetricsReport), RunError> {
    sc.validate()?;
    let starts = sc.resolve_starts();
    let mut world = World::new(sc);
    let mut sched = Scheduler::new();
    for (i, &at) in starts.iter().enumerate() {
        sched.schedule(at, SimEvent::FlowStart(i)).expect("start in the future");
    }
    sched
        .schedule(sc.sample_interval, SimEvent::StatsSample)
        .expect("first sample in the future");
    sched.schedule(sc.duration, SimEvent::SimEnd).expect("end in the future");

    let summary = sched.run(sc.duration, |s, ev| world.handle(s, ev));

    let flows: Vec<FlowOutcome> = world
        .flows
        .iter()
        .enumerate()
        .map(|(i, f)| FlowOutcome {
            flow_id: i as FlowId + 1,
            kind: sc.flows[i].kind,
            start: starts[i],
            sender: f.sender.stats().clone(),
            ledbat: f.sender.controller().as_ledbat().map(|l| l.stats()),
            bytes_delivered: f.bytes_delivered,
        })
        .collect();
    let flow_ids: Vec<FlowId> = flows.iter().map(|f| f.flow_id).collect();
    let from = starts.iter().copied().max().unwrap_or(SimTime::ZERO);
    let iv = Interval::new(from, sc.duration)?;
    let report = MetricsReport::compute(&world.log, &flow_ids, sc.capacity_bps, iv)?;
    let set = TraceSet {
        scenario: sc.name.clone(),
        starts,
        trace: world.trace,
        log: world.log,
        flows,
        summary,
        conservation_violations: world.conservation_violations,
        cwnd_floor_violations: world.cwnd_floor_violations,
    };
    Ok((set, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::{preset, FlowSpec};

    fn short(mut sc: Scenario, secs: u64) -> Scenario {
        sc.duration = SimTime::from_secs(secs);
        sc
    }

    #[test]
    fn single_tcp_fills_the_link() {
        let sc = short(preset("hs-b40-tcp-alone", 1).unwrap(), 30);
        let (set, report) = run_scenario(&sc).unwrap();
        assert!(report.eta_percent > 90.0, "{}", report.eta_percent);
        assert_eq!(report.fairness, 1.0);
        assert_eq!(set.conservation_violations, 0);
        assert_eq!(set.cwnd_floor_violations, 0);
        assert_eq!(set.summary.final_clock, SimTime::from_secs(30));
    }

    #[test]
    fn lone_ledbat_never_overflows_the_buffer() {
        let sc = short(preset("hs-b40-ledbat-alone", 1).unwrap(), 60);
        let (set, report) = run_scenario(&sc).unwrap();
        assert_eq!(report.loss_rate, 0.0);
        assert!(report.eta_percent > 95.0, "{}", report.eta_percent);
        // steady queue close to the 25 ms target
        let q = crate::harness::trace::mean_over(&set.queue_delay_us(), SimTime::from_secs(30), SimTime::from_secs(60)).unwrap();
        assert!((q - 25_000.0).abs() < 3_000.0, "{q}");
    }

    #[test]
    fn runs_are_deterministic() {
        let sc = short(preset("fig2a", 5).unwrap(), 20);
        let (a, ra) = run_scenario(&sc).unwrap();
        let (b, rb) = run_scenario(&sc).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.log, b.log);
        assert_eq!(ra, rb);
    }

    #[test]
    fn late_flow_has_no_samples_before_start() {
        let mut sc = short(preset("fig3-mid", 1).unwrap(), 15);
        sc.flows[1] = FlowSpec::ledbat(10.0);
        let (set, report) = run_scenario(&sc).unwrap();
        let first = set.cwnd(2)[0].0;
        assert!(first >= SimTime::from_secs(10));
        assert_eq!(report.interval.start, SimTime::from_secs(10));
    }
}
