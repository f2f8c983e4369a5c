//! The single bottleneck: a drop-tail FIFO in front of a constant-rate
//! transmitter, followed by a fixed propagation delay. Acks return over a
//! lossless, order-preserving path with constant delay.
//!
//! Buffer accounting is in whole packets and the packet in service does not
//! count against the buffer size.

use std::collections::VecDeque;

use crate::engine::SimTime;

pub type FlowId = u16;

/// Data segment or acknowledgement crossing the simulated network.
///
/// Timestamps are in the sender's or receiver's local clock (microseconds,
/// signed because a clock may carry a negative offset).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub flow_id: FlowId,
    /// Data sequence number; numbering starts at 1.
    pub seq: u64,
    pub size_bytes: u32,
    pub sent_at_sender_clock: i64,
    pub is_ack: bool,
    /// Highest in-order sequence received so far (acks only, 0 = none).
    pub ack_of_seq: u64,
    /// Receiver-stamped one-way delay in microseconds (acks only).
    pub measured_delay: i64,
    /// Echo of the data packet's sender timestamp (acks only).
    pub echo_sender_clock: i64,
    pub is_retransmission: bool,
}

pub const ACK_BYTES: u32 = 40;

impl Packet {
    pub fn data(flow_id: FlowId, seq: u64, size_bytes: u32, sender_clock: i64) -> Self {
        Packet {
            flow_id,
            seq,
            size_bytes,
            sent_at_sender_clock: sender_clock,
            is_ack: false,
            ack_of_seq: 0,
            measured_delay: 0,
            echo_sender_clock: 0,
            is_retransmission: false,
        }
    }

    pub fn ack(flow_id: FlowId, ack_of_seq: u64, measured_delay: i64, echo_sender_clock: i64) -> Self {
        Packet {
            flow_id,
            seq: 0,
            size_bytes: ACK_BYTES,
            sent_at_sender_clock: 0,
            is_ack: true,
            ack_of_seq,
            measured_delay,
            echo_sender_clock,
            is_retransmission: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    /// The packet was queued. `service_done_at` is set when the link was idle
    /// and the packet went straight into service.
    Accepted { service_done_at: Option<SimTime> },
    Dropped,
}

/// A packet leaving the transmitter, due at the receiver at `deliver_at`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Departure {
    pub packet: Packet,
    pub deliver_at: SimTime,
    /// Set when the next queued packet entered service.
    pub next_service_done_at: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkCounters {
    /// Every data packet offered to the queue, accepted or not.
    pub enqueued: u64,
    pub dropped: u64,
    /// Packets whose transmission completed.
    pub delivered: u64,
    pub bytes_delivered: u64,
}

/// Transmission time of `bytes` at `capacity_bps`, rounded up to a whole
/// microsecond. Exact for 1500 B at 0.5, 2 and 10 Mbps.
pub fn transmission_time(bytes: u32, capacity_bps: u64) -> SimTime {
    let bits_us = bytes as u64 * 8 * 1_000_000;
    SimTime::from_micros(bits_us.div_ceil(capacity_bps))
}

#[derive(Debug, Clone)]
pub struct Bottleneck {
    capacity_bps: u64,
    prop_delay: SimTime,
    buffer_pkts: usize,
    queue: VecDeque<Packet>,
    in_service: Option<(Packet, SimTime)>,
    counters: LinkCounters,
}

impl Bottleneck {
    pub fn new(capacity_bps: u64, prop_delay: SimTime, buffer_pkts: usize) -> Self {
        assert!(capacity_bps > 0, "capacity must be positive");
        assert!(buffer_pkts > 0, "buffer must hold at least one packet");
        Bottleneck {
            capacity_bps,
            prop_delay,
            buffer_pkts,
            queue: VecDeque::with_capacity(buffer_pkts),
            in_service: None,
            counters: LinkCounters::default(),
        }
    }

    pub fn capacity_bps(&self) -> u64 {
        self.capacity_bps
    }

    pub fn prop_delay(&self) -> SimTime {
        self.prop_delay
    }

    pub fn buffer_pkts(&self) -> usize {
        self.buffer_pkts
    }

    pub fn counters(&self) -> LinkCounters {
        self.counters
    }

    /// Packets waiting, not counting the one in service.
    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_busy(&self) -> bool {
        self.in_service.is_some()
    }

    /// Waiting packets plus the one in service.
    pub fn backlog_pkts(&self) -> usize {
        self.queue.len() + usize::from(self.in_service.is_some())
    }

    pub fn service_time(&self, bytes: u32) -> SimTime {
        transmission_time(bytes, self.capacity_bps)
    }

    pub fn enqueue(&mut self, pkt: Packet, now: SimTime) -> EnqueueOutcome {
        debug_assert!(!pkt.is_ack, "acks use the return path");
        self.counters.enqueued += 1;
        if self.in_service.is_none() {
            let done = now + self.service_time(pkt.size_bytes);
            self.in_service = Some((pkt, done));
            return EnqueueOutcome::Accepted {
                service_done_at: Some(done),
            };
        }
        if self.queue.len() >= self.buffer_pkts {
            self.counters.dropped += 1;
            return EnqueueOutcome::Dropped;
        }
        self.queue.push_back(pkt);
        EnqueueOutcome::Accepted {
            service_done_at: None,
        }
    }

    /// Completes the transmission in progress and starts the next one.
    ///
    /// Panics if the link is idle; the caller only invokes this from the
    /// service-done event it was handed by [`Bottleneck::enqueue`] or a
    /// previous departure.
    pub fn service_complete(&mut self, now: SimTime) -> Departure {
        let (packet, done_at) = self
            .in_service
            .take()
            .expect("service completion on an idle link");
        debug_assert_eq!(done_at, now);
        self.counters.delivered += 1;
        self.counters.bytes_delivered += packet.size_bytes as u64;
        let next_service_done_at = self.queue.pop_front().map(|next| {
            let done = now + self.service_time(next.size_bytes);
            self.in_service = Some((next, done));
            done
        });
        Departure {
            packet,
            deliver_at: now + self.prop_delay,
            next_service_done_at,
        }
    }

    /// Time needed to drain everything currently queued, including the
    /// residual of the packet in service. For tracing only.
    pub fn queuing_delay_now(&self, now: SimTime) -> SimTime {
        let residual = self
            .in_service
            .as_ref()
            .map_or(SimTime::ZERO, |(_, done)| done.saturating_sub(now));
        let queued_bytes: u64 = self.queue.iter().map(|p| p.size_bytes as u64).sum();
        let queued = SimTime::from_micros((queued_bytes * 8 * 1_000_000).div_ceil(self.capacity_bps));
        residual + queued
    }

    /// `enqueued = delivered + dropped + waiting + in service`.
    pub fn conserves_packets(&self) -> bool {
        let c = self.counters;
        c.enqueued == c.delivered + c.dropped + self.backlog_pkts() as u64
    }
}

/// Lossless, order-preserving return path with constant delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckPath {
    pub delay: SimTime,
}

impl AckPath {
    pub fn deliver_at(&self, now: SimTime) -> SimTime {
        now + self.delay
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Scheduler;
    use proptest::prelude::*;

    fn data(seq: u64) -> Packet {
        Packet::data(1, seq, 1500, 0)
    }

    #[test]
    fn service_times_match_bit_arithmetic() {
        // 1500 B * 8 bit / C
        assert_eq!(transmission_time(1500, 10_000_000), SimTime::from_micros(1_200));
        assert_eq!(transmission_time(1500, 2_000_000), SimTime::from_micros(6_000));
        assert_eq!(transmission_time(1500, 500_000), SimTime::from_micros(24_000));
    }

    #[test]
    fn idle_link_starts_service_immediately() {
        let mut link = Bottleneck::new(10_000_000, SimTime::from_micros(23_800), 40);
        let out = link.enqueue(data(1), SimTime::ZERO);
        assert_eq!(
            out,
            EnqueueOutcome::Accepted {
                service_done_at: Some(SimTime::from_micros(1_200))
            }
        );
        let dep = link.service_complete(SimTime::from_micros(1_200));
        assert_eq!(dep.deliver_at, SimTime::from_micros(25_000));
        assert_eq!(dep.next_service_done_at, None);
    }

    #[test]
    fn full_buffer_drops_tail() {
        let mut link = Bottleneck::new(10_000_000, SimTime::ZERO, 40);
        // one in service, 40 waiting
        for seq in 1..=41 {
            assert!(matches!(
                link.enqueue(data(seq), SimTime::ZERO),
                EnqueueOutcome::Accepted { .. }
            ));
        }
        assert_eq!(link.queue_len(), 40);
        assert_eq!(link.enqueue(data(42), SimTime::ZERO), EnqueueOutcome::Dropped);
        assert_eq!(link.counters().dropped, 1);
        assert!(link.conserves_packets());
    }

    #[test]
    fn queuing_delay_includes_residual_service() {
        let mut link = Bottleneck::new(10_000_000, SimTime::ZERO, 100);
        assert_eq!(link.queuing_delay_now(SimTime::ZERO), SimTime::ZERO);
        for seq in 1..=21 {
            link.enqueue(data(seq), SimTime::ZERO);
        }
        // 20 waiting at 1200 us each plus 1000 us left on the one in service
        assert_eq!(
            link.queuing_delay_now(SimTime::from_micros(200)),
            SimTime::from_micros(25_000)
        );
    }

    #[test]
    fn target_in_packets_matches_queue_delay() {
        // 25 ms of backlog is 20.83 packets at 10 Mbps and 4.17 at 2 Mbps.
        for (capacity, pkts) in [(10_000_000u64, 20.8f64), (2_000_000, 4.2)] {
            let per_pkt = transmission_time(1500, capacity).as_micros() as f64;
            let delay_ms = pkts * per_pkt / 1000.0;
            assert!((delay_ms - 25.0).abs() < 0.25, "{capacity}: {delay_ms}");
        }
    }

    #[test]
    fn ack_path_is_constant_delay() {
        let path = AckPath {
            delay: SimTime::from_millis(25),
        };
        assert_eq!(path.deliver_at(SimTime::from_secs(1)), SimTime::from_micros(1_025_000));
        let zero = AckPath { delay: SimTime::ZERO };
        assert_eq!(zero.deliver_at(SimTime::from_secs(1)), SimTime::from_secs(1));
    }

    #[derive(Debug, Clone)]
    enum Ev {
        Arrive(u64),
        Done,
        Deliver(u64),
    }

    proptest! {
        // Random arrival pattern through an engine-driven link: FIFO order,
        // conservation, work conservation and exact per-packet latency.
        #[test]
        fn link_is_fifo_and_conserving(
            gaps in proptest::collection::vec(0u64..3_000, 1..300),
            buffer in 1usize..20,
        ) {
            let prop = SimTime::from_micros(23_800);
            let mut link = Bottleneck::new(10_000_000, prop, buffer);
            let mut sched = Scheduler::new();
            let mut t = 0;
            for (i, g) in gaps.iter().enumerate() {
                t += g;
                sched.schedule(SimTime::from_micros(t), Ev::Arrive(i as u64 + 1)).unwrap();
            }
            let mut enq_at = std::collections::HashMap::new();
            let mut delivered = Vec::new();
            let mut accepted = Vec::new();
            let mut ok = true;
            sched.run(SimTime::MAX, |s, ev| {
                let now = s.now();
                match ev.payload {
                    Ev::Arrive(seq) => {
                        match link.enqueue(data(seq), now) {
                            EnqueueOutcome::Accepted { service_done_at } => {
                                accepted.push(seq);
                                enq_at.insert(seq, (now, link.queue_len()));
                                if let Some(done) = service_done_at {
                                    s.schedule(done, Ev::Done).unwrap();
                                }
                            }
                            EnqueueOutcome::Dropped => {}
                        }
                    }
                    Ev::Done => {
                        let dep = link.service_complete(now);
                        if let Some(done) = dep.next_service_done_at {
                            s.schedule(done, Ev::Done).unwrap();
                        }
                        s.schedule(dep.deliver_at, Ev::Deliver(dep.packet.seq)).unwrap();
                    }
                    Ev::Deliver(seq) => {
                        let (at, _) = enq_at[&seq];
                        // waiting + 1200 us service + propagation
                        ok &= now.as_micros() >= at.as_micros() + 1_200 + prop.as_micros();
                        delivered.push(seq);
                    }
                }
                ok &= link.conserves_packets();
                ok &= link.queue_len() <= buffer;
                ok &= link.queue_len() == 0 || link.is_busy();
            });
            prop_assert!(ok);
            prop_assert_eq!(delivered, accepted);
            let c = link.counters();
            prop_assert_eq!(c.enqueued, c.delivered + c.dropped);
        }
    }
}
