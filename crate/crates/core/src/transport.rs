//! Reliability machinery shared by the LEDBAT and TCP senders.
//!
//! Both controllers sit behind the same loss detection (three duplicate
//! cumulative acks, a NewReno-style partial-ack retransmission while in
//! recovery, and a coarse safety timeout), the same RTT estimator and the same
//! once-per-RTT limit on window halving. Only window growth, the loss
//! reaction and pacing differ, and those live behind [`CongestionControl`].
//!
//! The receiver acks every data packet. Since the network never drops or
//! reorders acks, each ack stands for exactly one data packet that left the
//! network; the sender's flight size is kept as
//! `sent - acks received - packets declared lost`.

use std::collections::BTreeSet;

use crate::engine::SimTime;
use crate::ledbat::Ledbat;
use crate::network::{FlowId, Packet};
use crate::tcp::Tcp;

/// Window controller plugged into a [`Sender`].
pub trait CongestionControl {
    fn cwnd(&self) -> f64;

    /// Every ack, duplicate or not, carries a one-way delay sample.
    fn on_delay_sample(&mut self, _measured_delay_us: i64, _now: SimTime) {}

    /// One new cumulative ack outside loss recovery.
    fn on_new_ack(&mut self, now: SimTime);

    /// A loss event that passed the once-per-RTT filter.
    fn on_loss(&mut self, now: SimTime);

    /// Inter-send spacing; zero means the window goes out back-to-back.
    fn pacing_gap(&self, rtt_est_us: u64) -> SimTime;
}

#[derive(Debug, Clone)]
pub enum Controller {
    Ledbat(Ledbat),
    Tcp(Tcp),
}

impl Controller {
    pub fn as_ledbat(&self) -> Option<&Ledbat> {
        match self {
            Controller::Ledbat(l) => Some(l),
            Controller::Tcp(_) => None,
        }
    }

    pub fn is_ledbat(&self) -> bool {
        matches!(self, Controller::Ledbat(_))
    }
}

impl CongestionControl for Controller {
    fn cwnd(&self) -> f64 {
        match self {
            Controller::Ledbat(c) => c.cwnd(),
            Controller::Tcp(c) => c.cwnd(),
        }
    }

    fn on_delay_sample(&mut self, measured_delay_us: i64, now: SimTime) {
        match self {
            Controller::Ledbat(c) => c.on_delay_sample(measured_delay_us, now),
            Controller::Tcp(c) => c.on_delay_sample(measured_delay_us, now),
        }
    }

    fn on_new_ack(&mut self, now: SimTime) {
        match self {
            Controller::Ledbat(c) => c.on_new_ack(now),
            Controller::Tcp(c) => c.on_new_ack(now),
        }
    }

    fn on_loss(&mut self, now: SimTime) {
        match self {
            Controller::Ledbat(c) => c.on_loss(now),
            Controller::Tcp(c) => c.on_loss(now),
        }
    }

    fn pacing_gap(&self, rtt_est_us: u64) -> SimTime {
        match self {
            Controller::Ledbat(c) => c.pacing_gap(rtt_est_us),
            Controller::Tcp(c) => c.pacing_gap(rtt_est_us),
        }
    }
}

/// Cumulative-ack receiver that stamps each ack with the one-way delay seen
/// by the data packet that triggered it.
#[derive(Debug, Clone, Default)]
pub struct Receiver {
    flow_id: FlowId,
    highest_in_order: u64,
    out_of_order: BTreeSet<u64>,
    clock_offset_us: i64,
}

impl Receiver {
    pub fn new(flow_id: FlowId, clock_offset_us: i64) -> Self {
        Receiver {
            flow_id,
            clock_offset_us,
            ..Default::default()
        }
    }

    /// The receiver's local clock at simulation time `now`.
    pub fn local_clock(&self, now: SimTime) -> i64 {
        now.as_micros() as i64 + self.clock_offset_us
    }

    pub fn highest_in_order(&self) -> u64 {
        self.highest_in_order
    }

    /// Builds the ack for `pkt`, given the receiver's local timestamp.
    pub fn on_data(&mut self, pkt: &Packet, local_clock: i64) -> Packet {
        debug_assert!(!pkt.is_ack && pkt.flow_id == self.flow_id);
        if pkt.seq == self.highest_in_order + 1 {
            self.highest_in_order = pkt.seq;
            while self.out_of_order.remove(&(self.highest_in_order + 1)) {
                self.highest_in_order += 1;
            }
        } else if pkt.seq > self.highest_in_order {
            self.out_of_order.insert(pkt.seq);
        }
        Packet::ack(
            self.flow_id,
            self.highest_in_order,
            local_clock - pkt.sent_at_sender_clock,
            pkt.sent_at_sender_clock,
        )
    }
}

/// Smoothed RTT with weight 1/8, seeded by the first sample.
#[derive(Debug, Clone, Copy)]
pub struct RttEstimator {
    srtt_us: Option<u64>,
    initial_us: u64,
    max_us: u64,
}

impl RttEstimator {
    pub fn new(initial_us: u64) -> Self {
        RttEstimator {
            srtt_us: None,
            initial_us: initial_us.max(1),
            max_us: 0,
        }
    }

    pub fn sample(&mut self, rtt_us: u64) {
        let rtt_us = rtt_us.max(1);
        self.max_us = self.max_us.max(rtt_us);
        self.srtt_us = Some(match self.srtt_us {
            None => rtt_us,
            Some(s) => (7 * s + rtt_us + 4) / 8,
        });
    }

    /// Smoothed estimate, or the configured prior before any sample.
    pub fn get(&self) -> u64 {
        self.srtt_us.unwrap_or(self.initial_us)
    }

    pub fn max_observed(&self) -> u64 {
        self.max_us
    }
}

pub const MIN_SAFETY_TIMEOUT: SimTime = SimTime::from_secs(1);
pub const DUPACK_THRESHOLD: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEvent {
    pub at: SimTime,
    /// False when the once-per-RTT filter suppressed the window reduction.
    pub halved: bool,
    pub via_timeout: bool,
    pub cwnd_after: f64,
    pub rtt_est_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Recovery {
    /// Fast retransmit in progress; partial acks retransmit the next hole.
    Fast { recover: u64 },
    /// Go-back-N after a safety timeout; duplicate acks are ignored.
    Timeout { recover: u64 },
}

#[derive(Debug, Clone, Default)]
pub struct SenderStats {
    pub data_sent: u64,
    pub retransmissions: u64,
    pub acks_received: u64,
    pub loss_events: u64,
    pub timeouts: u64,
    /// `(time, rtt estimate at that time)` of every window halving.
    pub halvings: Vec<(SimTime, u64)>,
    /// Sends that left more than `ceil(cwnd)` packets in flight.
    pub window_overruns: u64,
}

#[derive(Debug, Clone, Default)]
pub struct AckOutcome {
    /// The cumulative ack advanced.
    pub progressed: bool,
    pub loss: Option<LossEvent>,
    /// When set, the pacer wants to be woken at this instant.
    pub wake_at: Option<SimTime>,
}

#[derive(Debug, Clone)]
pub struct Sender {
    flow_id: FlowId,
    packet_bytes: u32,
    clock_offset_us: i64,
    controller: Controller,
    /// Next new sequence number to transmit.
    next_seq: u64,
    /// Highest sequence number ever transmitted.
    high_seq: u64,
    /// Highest cumulatively acked sequence number.
    snd_una: u64,
    dupacks: u32,
    recovery: Option<Recovery>,
    /// Highest sequence outstanding at the last safety timeout. Duplicate
    /// acks at or below it come from go-back-N resends and are not a loss
    /// signal.
    timeout_recover: Option<u64>,
    flight: u64,
    rtt: RttEstimator,
    last_halving_at: Option<SimTime>,
    next_paced_send: SimTime,
    stats: SenderStats,
}

impl Sender {
    pub fn new(
        flow_id: FlowId,
        packet_bytes: u32,
        clock_offset_us: i64,
        initial_rtt_us: u64,
        controller: Controller,
    ) -> Self {
        Sender {
            flow_id,
            packet_bytes,
            clock_offset_us,
            controller,
            next_seq: 1,
            high_seq: 0,
            snd_una: 0,
            dupacks: 0,
            recovery: None,
            timeout_recover: None,
            flight: 0,
            rtt: RttEstimator::new(initial_rtt_us),
            last_halving_at: None,
            next_paced_send: SimTime::ZERO,
            stats: SenderStats::default(),
        }
    }

    pub fn flow_id(&self) -> FlowId {
        self.flow_id
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn cwnd(&self) -> f64 {
        self.controller.cwnd()
    }

    pub fn flight(&self) -> u64 {
        self.flight
    }

    pub fn rtt_est_us(&self) -> u64 {
        self.rtt.get()
    }

    pub fn stats(&self) -> &SenderStats {
        &self.stats
    }

    pub fn in_recovery(&self) -> bool {
        self.recovery.is_some()
    }

    pub fn sender_clock(&self, now: SimTime) -> i64 {
        now.as_micros() as i64 + self.clock_offset_us
    }

    pub fn has_outstanding(&self) -> bool {
        self.snd_una < self.high_seq
    }

    /// `2 x` the largest RTT seen so far, never below one second.
    pub fn safety_timeout(&self) -> SimTime {
        SimTime::from_micros(2 * self.rtt.max_observed()).max(MIN_SAFETY_TIMEOUT)
    }

    fn window_allows_send(&self) -> bool {
        self.controller.cwnd() - self.flight as f64 >= 1.0
    }

    fn transmit(&mut self, seq: u64, now: SimTime, out: &mut Vec<Packet>) {
        let mut pkt = Packet::data(self.flow_id, seq, self.packet_bytes, self.sender_clock(now));
        pkt.is_retransmission = seq <= self.high_seq;
        if pkt.is_retransmission {
            self.stats.retransmissions += 1;
        }
        self.high_seq = self.high_seq.max(seq);
        self.flight += 1;
        self.stats.data_sent += 1;
        out.push(pkt);
    }

    /// Sends as much new data as the window and the pacer allow. Returns the
    /// instant the pacer next wants to run, if it is holding packets back.
    pub fn try_send(&mut self, now: SimTime, out: &mut Vec<Packet>) -> Option<SimTime> {
        while self.window_allows_send() {
            let gap = self.controller.pacing_gap(self.rtt.get());
            if gap > SimTime::ZERO {
                if now < self.next_paced_send {
                    return Some(self.next_paced_send);
                }
                self.next_paced_send = now + gap;
            }
            if self.next_seq <= self.snd_una {
                self.next_seq = self.snd_una + 1;
            }
            let seq = self.next_seq;
            self.next_seq += 1;
            self.transmit(seq, now, out);
            if self.flight as f64 > self.controller.cwnd().ceil() {
                self.stats.window_overruns += 1;
            }
        }
        None
    }

    fn loss_event(&mut self, now: SimTime, via_timeout: bool) -> LossEvent {
        self.stats.loss_events += 1;
        let rtt = self.rtt.get();
        let halved = match self.last_halving_at {
            None => true,
            Some(last) => now.saturating_sub(last).as_micros() >= rtt,
        };
        if halved {
            self.controller.on_loss(now);
            self.last_halving_at = Some(now);
            self.stats.halvings.push((now, rtt));
        }
        LossEvent {
            at: now,
            halved,
            via_timeout,
            cwnd_after: self.controller.cwnd(),
            rtt_est_us: rtt,
        }
    }

    /// Retransmits `seq`, whose original copy is known to be lost.
    fn retransmit_lost(&mut self, seq: u64, now: SimTime, out: &mut Vec<Packet>) {
        self.flight = self.flight.saturating_sub(1);
        self.transmit(seq, now, out);
    }

    pub fn on_ack(&mut self, ack: &Packet, now: SimTime, out: &mut Vec<Packet>) -> AckOutcome {
        debug_assert!(ack.is_ack && ack.flow_id == self.flow_id);
        self.stats.acks_received += 1;
        self.flight = self.flight.saturating_sub(1);
        let rtt_sample = self.sender_clock(now) - ack.echo_sender_clock;
        self.rtt.sample(rtt_sample.max(1) as u64);
        self.controller.on_delay_sample(ack.measured_delay, now);

        let mut outcome = AckOutcome::default();
        if ack.ack_of_seq > self.snd_una {
            self.snd_una = ack.ack_of_seq;
            self.dupacks = 0;
            outcome.progressed = true;
            match self.recovery {
                Some(Recovery::Fast { recover }) | Some(Recovery::Timeout { recover })
                    if self.snd_una >= recover =>
                {
                    self.recovery = None;
                }
                Some(Recovery::Fast { .. }) => {
                    // partial ack: the new hole was lost too
                    let hole = self.snd_una + 1;
                    self.retransmit_lost(hole, now, out);
                }
                Some(Recovery::Timeout { .. }) => self.controller.on_new_ack(now),
                None => self.controller.on_new_ack(now),
            }
        } else if self.has_outstanding()
            && self.recovery.is_none()
            && self.timeout_recover.is_none_or(|r| self.snd_una > r)
        {
            self.dupacks += 1;
            if self.dupacks == DUPACK_THRESHOLD {
                outcome.loss = Some(self.loss_event(now, false));
                self.recovery = Some(Recovery::Fast {
                    recover: self.high_seq,
                });
                let hole = self.snd_una + 1;
                self.retransmit_lost(hole, now, out);
            }
        }
        outcome.wake_at = self.try_send(now, out);
        outcome
    }

    /// Safety timeout with data outstanding: everything in flight is presumed
    /// lost and the window is resent from the first hole.
    pub fn on_safety_timeout(&mut self, now: SimTime, out: &mut Vec<Packet>) -> Option<LossEvent> {
        if !self.has_outstanding() {
            return None;
        }
        self.stats.timeouts += 1;
        let loss = self.loss_event(now, true);
        self.recovery = Some(Recovery::Timeout {
            recover: self.high_seq,
        });
        self.timeout_recover = Some(self.high_seq);
        self.dupacks = 0;
        self.flight = 0;
        self.next_seq = self.snd_una + 1;
        self.next_paced_send = now;
        let first = self.next_seq;
        self.next_seq += 1;
        self.transmit(first, now, out);
        Some(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcp::TcpConfig;

    fn tcp_sender(cwnd: f64) -> Sender {
        let cfg = TcpConfig {
            slow_start: false,
            initial_cwnd_pkts: cwnd,
        };
        Sender::new(1, 1500, 0, 50_000, Controller::Tcp(Tcp::new(cfg)))
    }

    fn ack_for(rx: &mut Receiver, pkt: &Packet) -> Packet {
        rx.on_data(pkt, pkt.sent_at_sender_clock + 25_000)
    }

    #[test]
    fn receiver_stamps_delay_and_cumulative_ack() {
        let mut rx = Receiver::new(1, 0);
        let p1 = Packet::data(1, 1, 1500, 1_000);
        let ack = rx.on_data(&p1, 27_200);
        assert_eq!(ack.measured_delay, 26_200);
        assert_eq!(ack.ack_of_seq, 1);
        assert_eq!(ack.echo_sender_clock, 1_000);
        // 2 lost, 3 and 4 arrive: duplicate acks for 1
        for seq in [3, 4] {
            let a = rx.on_data(&Packet::data(1, seq, 1500, 0), 0);
            assert_eq!(a.ack_of_seq, 1);
        }
        let a = rx.on_data(&Packet::data(1, 2, 1500, 0), 0);
        assert_eq!(a.ack_of_seq, 4);
    }

    #[test]
    fn receiver_offset_shifts_measured_delay() {
        let hour = 3_600_000_000i64;
        let mut plain = Receiver::new(1, 0);
        let mut shifted = Receiver::new(1, hour);
        let now = SimTime::from_micros(126_200);
        let pkt = Packet::data(1, 1, 1500, 100_000);
        let a = plain.on_data(&pkt, plain.local_clock(now));
        let b = shifted.on_data(&pkt, shifted.local_clock(now));
        assert_eq!(b.measured_delay - a.measured_delay, hour);
    }

    #[test]
    fn rtt_estimator_ewma() {
        let mut r = RttEstimator::new(50_000);
        assert_eq!(r.get(), 50_000);
        r.sample(80_000);
        assert_eq!(r.get(), 80_000);
        r.sample(0);
        assert_eq!(r.get(), 70_000);
        assert_eq!(r.max_observed(), 80_000);
    }

    #[test]
    fn triple_dupack_halves_and_retransmits() {
        let mut s = tcp_sender(10.0);
        let mut rx = Receiver::new(1, 0);
        let mut out = Vec::new();
        s.try_send(SimTime::ZERO, &mut out);
        assert_eq!(out.len(), 10);
        assert_eq!(s.flight(), 10);
        let sent: Vec<Packet> = std::mem::take(&mut out);
        // packet 1 lost, 2..=4 produce three duplicate acks
        let mut loss = None;
        for pkt in &sent[1..4] {
            let ack = ack_for(&mut rx, pkt);
            let o = s.on_ack(&ack, SimTime::from_millis(50), &mut out);
            loss = loss.or(o.loss);
        }
        let loss = loss.expect("loss detected on third dupack");
        assert!(loss.halved);
        assert_eq!(s.cwnd(), 5.0);
        // the first two dupacks each free a slot for new data; after the
        // third only the retransmission goes out
        let seqs: Vec<(u64, bool)> = out.iter().map(|p| (p.seq, p.is_retransmission)).collect();
        assert_eq!(seqs, vec![(11, false), (12, false), (1, true)]);
        assert!(s.in_recovery());
    }

    #[test]
    fn halving_at_most_once_per_rtt() {
        let mut s = tcp_sender(20.0);
        let first = s.loss_event(SimTime::from_secs(1), false);
        assert!(first.halved);
        assert_eq!(s.cwnd(), 10.0);
        let second = s.loss_event(SimTime::from_micros(1_010_000), false);
        assert!(!second.halved);
        assert_eq!(s.cwnd(), 10.0);
        let third = s.loss_event(SimTime::from_micros(1_050_000), false);
        assert!(third.halved);
        assert_eq!(s.cwnd(), 5.0);
    }

    #[test]
    fn partial_ack_retransmits_next_hole() {
        let mut s = tcp_sender(10.0);
        let mut rx = Receiver::new(1, 0);
        let mut out = Vec::new();
        s.try_send(SimTime::ZERO, &mut out);
        let sent: Vec<Packet> = std::mem::take(&mut out);
        // 1 and 5 lost
        let mut t = SimTime::from_millis(50);
        for pkt in sent.iter().filter(|p| p.seq != 1 && p.seq != 5) {
            let ack = ack_for(&mut rx, pkt);
            s.on_ack(&ack, t, &mut out);
            t += SimTime::from_micros(1_200);
        }
        let rtx: Vec<u64> = out.iter().filter(|p| p.is_retransmission).map(|p| p.seq).collect();
        assert_eq!(rtx, vec![1]);
        let rtx1 = out.iter().find(|p| p.seq == 1).unwrap().clone();
        out.clear();
        let ack = ack_for(&mut rx, &rtx1);
        assert_eq!(ack.ack_of_seq, 4);
        s.on_ack(&ack, SimTime::from_millis(100), &mut out);
        assert!(out.iter().any(|p| p.seq == 5 && p.is_retransmission));
    }

    #[test]
    fn safety_timeout_goes_back_to_first_hole() {
        let mut s = tcp_sender(4.0);
        let mut out = Vec::new();
        s.try_send(SimTime::ZERO, &mut out);
        assert_eq!(s.safety_timeout(), MIN_SAFETY_TIMEOUT);
        out.clear();
        let loss = s.on_safety_timeout(SimTime::from_secs(1), &mut out).unwrap();
        assert!(loss.via_timeout && loss.halved);
        assert_eq!(s.cwnd(), 2.0);
        assert_eq!(s.flight(), 1);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].seq, 1);
        assert!(out[0].is_retransmission);
        assert_eq!(s.stats().timeouts, 1);
    }

    #[test]
    fn resends_after_timeout_do_not_trigger_fast_retransmit() {
        let mut s = tcp_sender(8.0);
        let mut rx = Receiver::new(1, 0);
        let mut out = Vec::new();
        s.try_send(SimTime::ZERO, &mut out);
        let sent: Vec<Packet> = std::mem::take(&mut out);
        // 1 lost, 2..=8 delivered, but their acks are only duplicates of 0;
        // pretend those acks were lost too so the timer fires
        for pkt in &sent[1..] {
            rx.on_data(pkt, 0);
        }
        s.on_safety_timeout(SimTime::from_secs(1), &mut out).unwrap();
        assert_eq!(s.stats().halvings.len(), 1);
        // the retransmitted 1 fills the hole: cumulative ack jumps to 8
        let t = SimTime::from_millis(1_050);
        let rtx = out.remove(0);
        let ack = ack_for(&mut rx, &rtx);
        assert_eq!(ack.ack_of_seq, 8);
        s.on_ack(&ack, t, &mut out);
        assert!(!s.in_recovery());
        // go-back-N copies of 2..=4 that were already in flight come back as
        // duplicate acks of 8
        for seq in 2..=4 {
            let dup = rx.on_data(&Packet::data(1, seq, 1500, t.as_micros() as i64), 0);
            assert_eq!(dup.ack_of_seq, 8);
            let o = s.on_ack(&dup, SimTime::from_millis(1_100), &mut out);
            assert!(o.loss.is_none());
        }
        assert_eq!(s.stats().halvings.len(), 1);
    }

    #[test]
    fn fractional_window_sends_on_whole_packets() {
        let mut s = tcp_sender(2.5);
        let mut out = Vec::new();
        s.try_send(SimTime::ZERO, &mut out);
        assert_eq!(out.len(), 2);
        assert_eq!(s.stats().window_overruns, 0);
    }
}
