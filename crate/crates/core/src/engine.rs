//! Deterministic discrete-event scheduler.
//!
//! Events are kept in a map keyed by `(fire_at, seq)`, where `seq` is a global
//! insertion counter. That key is a strict total order, so two events never
//! compare equal and same-instant events are dispatched in insertion order.
//! The clock is an integer number of microseconds and never moves backwards.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use thiserror::Error;

/// Simulation instant or interval, in integer microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond; negative inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * 1e6).round().max(0.0) as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_sub(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_sub(rhs.0).map(SimTime)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    /// Panics on underflow; use [`SimTime::saturating_sub`] when the order is
    /// not known.
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("SimTime subtraction underflow"),
        )
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// A dispatched event.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<E> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: E,
}

/// Identifies a scheduled event for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle {
    fire_at: SimTime,
    seq: u64,
}

impl EventHandle {
    pub fn fire_at(&self) -> SimTime {
        self.fire_at
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("cannot schedule at {at}: clock is already at {now}")]
    SchedulingInPast { at: SimTime, now: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub events_dispatched: u64,
    pub final_clock: SimTime,
}

pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    dispatched: u64,
    pending: BTreeMap<(SimTime, u64), E>,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            dispatched: 0,
            pending: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn events_dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn schedule(&mut self, fire_at: SimTime, payload: E) -> Result<EventHandle, EngineError> {
        if fire_at < self.now {
            return Err(EngineError::SchedulingInPast {
                at: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert((fire_at, seq), payload);
        Ok(EventHandle { fire_at, seq })
    }

    /// Schedules `delay` after the current clock. Cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, payload)
            .expect("relative schedule is never in the past")
    }

    /// Returns true iff the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&(handle.fire_at, handle.seq)).is_some()
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains_key(&(handle.fire_at, handle.seq))
    }

    /// Pops the earliest event if it fires at or before `until`, advancing the
    /// clock to its time.
    pub fn pop_due(&mut self, until: SimTime) -> Option<Event<E>> {
        let entry = self.pending.first_entry()?;
        let (fire_at, seq) = *entry.key();
        if fire_at > until {
            return None;
        }
        let payload = entry.remove();
        debug_assert!(fire_at >= self.now);
        self.now = fire_at;
        self.dispatched += 1;
        Some(Event {
            fire_at,
            seq,
            payload,
        })
    }

    /// Dispatches every event with `fire_at <= until` in `(fire_at, seq)` order.
    /// Handlers may schedule or cancel further events.
    pub fn run<F>(&mut self, until: SimTime, mut handler: F) -> RunSummary
    where
        F: FnMut(&mut Scheduler<E>, Event<E>),
    {
        let start = self.dispatched;
        while let Some(ev) = self.pop_due(until) {
            handler(self, ev);
        }
        RunSummary {
            events_dispatched: self.dispatched - start,
            final_clock: self.now,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schedule_at_current_time_fires_first() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_micros(5), "later").unwrap();
        s.schedule(SimTime::ZERO, "now").unwrap();
        let mut seen = Vec::new();
        s.run(SimTime::from_secs(1), |_, ev| seen.push(ev.payload));
        assert_eq!(seen, vec!["now", "later"]);
    }

    #[test]
    fn same_instant_dispatches_in_insertion_order() {
        let mut s = Scheduler::new();
        for i in 0..5 {
            s.schedule(SimTime::from_millis(3), i).unwrap();
        }
        let mut seen = Vec::new();
        s.run(SimTime::MAX, |_, ev| seen.push(ev.payload));
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn scheduling_in_past_is_rejected() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_micros(10), ()).unwrap();
        s.run(SimTime::MAX, |_, _| {});
        assert_eq!(s.now(), SimTime::from_micros(10));
        assert_eq!(
            s.schedule(SimTime::from_micros(5), ()),
            Err(EngineError::SchedulingInPast {
                at: SimTime::from_micros(5),
                now: SimTime::from_micros(10)
            })
        );
    }

    #[test]
    fn cancel_semantics() {
        let mut s = Scheduler::new();
        let timer = s.schedule(SimTime::from_millis(50), "pacing").unwrap();
        let other = s.schedule(SimTime::from_millis(10), "other").unwrap();
        assert!(s.cancel(timer));
        assert!(!s.cancel(timer));
        let mut seen = Vec::new();
        s.run(SimTime::MAX, |_, ev| seen.push(ev.payload));
        assert_eq!(seen, vec!["other"]);
        assert!(!s.cancel(other));
    }

    #[test]
    fn empty_run_leaves_clock_unchanged() {
        let mut s: Scheduler<()> = Scheduler::new();
        let summary = s.run(SimTime::from_secs(300), |_, _| {});
        assert_eq!(summary.events_dispatched, 0);
        assert_eq!(summary.final_clock, SimTime::ZERO);
    }

    #[test]
    fn run_stops_at_until_and_keeps_later_events() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(1), 1).unwrap();
        s.schedule(SimTime::from_secs(3), 3).unwrap();
        let summary = s.run(SimTime::from_secs(2), |_, _| {});
        assert_eq!(summary.events_dispatched, 1);
        assert_eq!(summary.final_clock, SimTime::from_secs(1));
        assert_eq!(s.pending_len(), 1);
    }

    #[test]
    fn handlers_can_chain_events() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::ZERO, 0u32).unwrap();
        let summary = s.run(SimTime::from_secs(300), |s, ev| {
            if ev.payload < 9 {
                s.schedule_in(SimTime::from_secs(1), ev.payload + 1);
            }
        });
        assert_eq!(summary.events_dispatched, 10);
        assert_eq!(summary.final_clock, SimTime::from_secs(9));
    }

    proptest! {
        #[test]
        fn dispatch_order_is_time_then_insertion(times in proptest::collection::vec(0u64..20, 1..200)) {
            let mut s = Scheduler::new();
            for (i, t) in times.iter().enumerate() {
                s.schedule(SimTime::from_micros(*t), i).unwrap();
            }
            let mut seen = Vec::new();
            let mut last = SimTime::ZERO;
            s.run(SimTime::MAX, |s, ev| {
                assert!(s.now() >= last);
                last = s.now();
                seen.push((ev.fire_at, ev.payload));
            });
            let mut expected: Vec<_> = times
                .iter()
                .enumerate()
                .map(|(i, t)| (SimTime::from_micros(*t), i))
                .collect();
            expected.sort();
            prop_assert_eq!(seen, expected);
        }
    }
}
