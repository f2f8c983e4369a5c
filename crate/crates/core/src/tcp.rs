//! Idealized TCP Reno-style AIMD competitor.
//!
//! Congestion avoidance adds `1/cwnd` per new ack, slow start adds one packet
//! per ack, and a loss sets `ssthresh = cwnd/2`, halves the window and leaves
//! slow start. There are no delayed acks and no fast-recovery window
//! inflation; the window is sent in bursts.

use crate::engine::SimTime;
use crate::transport::CongestionControl;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpConfig {
    pub slow_start: bool,
    pub initial_cwnd_pkts: f64,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            slow_start: false,
            initial_cwnd_pkts: 2.0,
        }
    }
}

pub const MIN_CWND_PKTS: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct Tcp {
    cwnd: f64,
    ssthresh: f64,
    ss_active: bool,
}

impl Tcp {
    pub fn new(config: TcpConfig) -> Self {
        Tcp {
            cwnd: config.initial_cwnd_pkts.max(MIN_CWND_PKTS),
            ssthresh: f64::INFINITY,
            ss_active: config.slow_start,
        }
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

    pub fn tcp_on_ack(&mut self) {
        if self.ss_active {
            self.cwnd += 1.0;
            if self.cwnd >= self.ssthresh {
                self.ss_active = false;
            }
        } else {
            self.cwnd += 1.0 / self.cwnd;
        }
    }

    pub fn tcp_on_loss(&mut self) {
        self.ssthresh = self.cwnd / 2.0;
        self.cwnd = (self.cwnd / 2.0).max(MIN_CWND_PKTS);
        self.ss_active = false;
    }
}

impl CongestionControl for Tcp {
    fn cwnd(&self) -> f64 {
        self.cwnd
    }

    fn on_new_ack(&mut self, _now: SimTime) {
        self.tcp_on_ack();
    }

    fn on_loss(&mut self, _now: SimTime) {
        self.tcp_on_loss();
    }

    fn pacing_gap(&self, _rtt_est_us: u64) -> SimTime {
        SimTime::ZERO
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tcp(slow_start: bool, cwnd: f64) -> Tcp {
        Tcp::new(TcpConfig {
            slow_start,
            initial_cwnd_pkts: cwnd,
        })
    }

    #[test]
    fn congestion_avoidance_adds_one_per_window() {
        let mut t = tcp(false, 40.0);
        // exact: the k-th ack of the window adds 1/cwnd_k
        let mut expected = 40.0f64;
        for _ in 0..40 {
            t.tcp_on_ack();
            expected += 1.0 / expected;
        }
        assert_eq!(t.cwnd(), expected);
        assert!((t.cwnd() - 41.0).abs() < 0.02);
    }

    #[test]
    fn slow_start_doubles_per_window() {
        let mut t = tcp(true, 4.0);
        for _ in 0..4 {
            t.tcp_on_ack();
        }
        assert_eq!(t.cwnd(), 8.0);
        assert!(t.in_slow_start());
    }

    #[test]
    fn loss_halves_and_exits_slow_start() {
        let mut t = tcp(true, 80.0);
        t.tcp_on_loss();
        assert_eq!(t.cwnd(), 40.0);
        assert_eq!(t.ssthresh(), 40.0);
        assert!(!t.in_slow_start());
        let mut one = tcp(false, 1.0);
        one.tcp_on_loss();
        assert_eq!(one.cwnd(), 1.0);
    }

    #[test]
    fn tcp_is_never_paced() {
        assert_eq!(tcp(false, 10.0).pacing_gap(50_000), SimTime::ZERO);
    }
}
