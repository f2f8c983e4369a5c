//! LEDBAT sender: one-way delay based linear window controller.
//!
//! Every ack carries the one-way delay the receiver measured for the data
//! packet it acknowledges. The sender keeps the minimum of those samples per
//! minute of simulated time over the last `base_histo_minutes` minutes; the
//! smallest of them is the base delay, and `current - base` is the queuing
//! delay estimate. Each new ack then moves the window by
//! `gain * (target - queuing_delay) / cwnd` packets.
//!
//! With `gain = 1/target` and an empty queue this is one packet per RTT, the
//! same ramp-up as TCP congestion avoidance; with a queuing delay of twice the
//! target the window shrinks at one packet per RTT.

use std::collections::VecDeque;

use thiserror::Error;

use crate::engine::SimTime;
use crate::transport::CongestionControl;

pub const DEFAULT_TARGET_US: u64 = 25_000;
pub const MINUTE: SimTime = SimTime::from_secs(60);

/// Window gain as an exact fraction per microsecond of off-target delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gain {
    pub num: u64,
    pub den: u64,
}

impl Gain {
    pub fn one_over(target_us: u64) -> Self {
        Gain {
            num: 1,
            den: target_us,
        }
    }

    /// Window increment (packets) for one ack.
    pub fn increment(&self, off_target_us: i64, cwnd: f64) -> f64 {
        (self.num as f64 * off_target_us as f64) / self.den as f64 / cwnd
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("target must be positive")]
    ZeroTarget,
    #[error("gain denominator must be positive")]
    ZeroGainDenominator,
    #[error("base_histo_minutes must be in [2, 10], got {0}")]
    BaseHisto(u32),
    #[error("min_cwnd_pkts must be positive, got {0}")]
    MinCwnd(f64),
    #[error("initial cwnd {initial} below minimum {min}")]
    InitialCwnd { initial: f64, min: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedbatConfig {
    pub target_us: u64,
    pub gain: Gain,
    pub min_cwnd_pkts: f64,
    pub initial_cwnd_pkts: f64,
    pub pacing: bool,
    pub slow_start: bool,
    pub base_histo_minutes: u32,
    /// Receiver clock minus sender clock.
    pub clock_offset_us: i64,
    /// Fault injection: treat every delay sample as zero queuing delay.
    pub pin_queuing_delay_to_zero: bool,
}

impl Default for LedbatConfig {
    fn default() -> Self {
        LedbatConfig {
            target_us: DEFAULT_TARGET_US,
            gain: Gain::one_over(DEFAULT_TARGET_US),
            min_cwnd_pkts: 1.0,
            initial_cwnd_pkts: 2.0,
            pacing: true,
            slow_start: false,
            base_histo_minutes: 2,
            clock_offset_us: 0,
            pin_queuing_delay_to_zero: false,
        }
    }
}

impl LedbatConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.target_us == 0 {
            return Err(ConfigError::ZeroTarget);
        }
        if self.gain.den == 0 {
            return Err(ConfigError::ZeroGainDenominator);
        }
        if !(2..=10).contains(&self.base_histo_minutes) {
            return Err(ConfigError::BaseHisto(self.base_histo_minutes));
        }
        if !(self.min_cwnd_pkts > 0.0) {
            return Err(ConfigError::MinCwnd(self.min_cwnd_pkts));
        }
        if self.initial_cwnd_pkts < self.min_cwnd_pkts {
            return Err(ConfigError::InitialCwnd {
                initial: self.initial_cwnd_pkts,
                min: self.min_cwnd_pkts,
            });
        }
        Ok(())
    }
}

/// Per-minute minima of the one-way delay, oldest first.
#[derive(Debug, Clone)]
pub struct BaseDelayHistory {
    slots: VecDeque<(u64, i64)>,
    capacity: usize,
}

impl BaseDelayHistory {
    pub fn new(minutes: u32) -> Self {
        BaseDelayHistory {
            slots: VecDeque::with_capacity(minutes as usize + 1),
            capacity: minutes.max(1) as usize,
        }
    }

    /// Folds a sample into the slot of the current minute; a new minute opens
    /// a slot and evicts the oldest one beyond capacity.
    pub fn update(&mut self, delay_us: i64, now: SimTime) {
        let minute = now.as_micros() / MINUTE.as_micros();
        match self.slots.back_mut() {
            Some((m, min)) if *m == minute => *min = (*min).min(delay_us),
            _ => {
                self.slots.push_back((minute, delay_us));
                while self.slots.len() > self.capacity {
                    self.slots.pop_front();
                }
            }
        }
    }

    /// Minimum over all slots; `None` before the first sample.
    pub fn base(&self) -> Option<i64> {
        self.slots.iter().map(|(_, d)| *d).min()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Counters used by the ramp-up property checks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LedbatStats {
    pub window_updates: u64,
    /// Updates whose increment exceeded `1/cwnd`.
    pub ramp_violations: u64,
    pub max_increment_times_cwnd: f64,
}

#[derive(Debug, Clone)]
pub struct Ledbat {
    config: LedbatConfig,
    cwnd: f64,
    history: BaseDelayHistory,
    current_delay_us: Option<i64>,
    ss_active: bool,
    ssthresh: f64,
    stats: LedbatStats,
}

impl Ledbat {
    pub fn new(config: LedbatConfig) -> Self {
        Ledbat {
            cwnd: config.initial_cwnd_pkts.max(config.min_cwnd_pkts),
            history: BaseDelayHistory::new(config.base_histo_minutes),
            current_delay_us: None,
            ss_active: config.slow_start,
            ssthresh: f64::INFINITY,
            stats: LedbatStats::default(),
            config,
        }
    }

    pub fn config(&self) -> &LedbatConfig {
        &self.config
    }

    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }

    pub fn in_slow_start(&self) -> bool {
        self.ss_active
    }

    pub fn stats(&self) -> LedbatStats {
        self.stats
    }

    pub fn base_delay_us(&self) -> Option<i64> {
        self.history.base()
    }

    pub fn current_delay_us(&self) -> Option<i64> {
        self.current_delay_us
    }

    /// `current - base`, never negative because the base includes the
    /// current sample.
    pub fn queuing_delay_us(&self) -> Option<i64> {
        if self.config.pin_queuing_delay_to_zero {
            return self.current_delay_us.map(|_| 0);
        }
        Some(self.current_delay_us? - self.history.base()?)
    }

    pub fn off_target_us(&self) -> i64 {
        self.config.target_us as i64 - self.queuing_delay_us().unwrap_or(0)
    }

    pub fn update_base_minima(&mut self, measured_delay_us: i64, now: SimTime) {
        self.history.update(measured_delay_us, now);
    }

    fn clamp(&mut self) {
        if self.cwnd < self.config.min_cwnd_pkts {
            self.cwnd = self.config.min_cwnd_pkts;
        }
    }

    /// Exponential growth: one packet per ack until the window passes
    /// `ssthresh`, then hand over to the linear controller.
    pub fn slow_start_step(&mut self) {
        self.cwnd += 1.0;
        if self.cwnd > self.ssthresh {
            self.ss_active = false;
        }
    }

    fn linear_step(&mut self) {
        let before = self.cwnd;
        let inc = self.config.gain.increment(self.off_target_us(), before);
        self.stats.window_updates += 1;
        if inc > 1.0 / before {
            self.stats.ramp_violations += 1;
        }
        self.stats.max_increment_times_cwnd = self.stats.max_increment_times_cwnd.max(inc * before);
        self.cwnd = before + inc;
        self.clamp();
    }

    /// Halve on loss (a slow-start loss restarts from the minimum window with
    /// `ssthresh` at half the old window). The caller enforces the
    /// once-per-RTT limit.
    pub fn sender_on_loss(&mut self) {
        if self.ss_active {
            self.ssthresh = self.cwnd / 2.0;
            self.cwnd = self.config.min_cwnd_pkts;
        } else {
            self.cwnd /= 2.0;
        }
        self.clamp();
    }

    /// Spacing between paced transmissions: one RTT spread over the window.
    pub fn pacing_next_send_gap(&self, rtt_est_us: u64) -> SimTime {
        pacing_next_send_gap(self.config.pacing, self.cwnd, rtt_est_us)
    }
}

pub fn pacing_next_send_gap(pacing: bool, cwnd_pkts: f64, rtt_est_us: u64) -> SimTime {
    if !pacing {
        return SimTime::ZERO;
    }
    let gap = (rtt_est_us as f64 / cwnd_pkts).round();
    SimTime::from_micros((gap as u64).max(1))
}

impl CongestionControl for Ledbat {
    fn cwnd(&self) -> f64 {
        self.cwnd
    }

    fn on_delay_sample(&mut self, measured_delay_us: i64, now: SimTime) {
        self.current_delay_us = Some(measured_delay_us);
        self.update_base_minima(measured_delay_us, now);
    }

    fn on_new_ack(&mut self, _now: SimTime) {
        if self.ss_active {
            self.slow_start_step();
        } else {
            self.linear_step();
        }
    }

    fn on_loss(&mut self, _now: SimTime) {
        self.sender_on_loss();
    }

    fn pacing_gap(&self, rtt_est_us: u64) -> SimTime {
        self.pacing_next_send_gap(rtt_est_us)
    }
}
