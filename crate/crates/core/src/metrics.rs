//! Jain fairness, link utilization and loss rate over a measurement interval.
//!
//! All quantities are computed from the bottleneck's event log: rates from
//! bytes whose transmission completed inside the interval, loss from packets
//! offered to the queue inside the interval.

use thiserror::Error;

use crate::engine::SimTime;
use crate::network::FlowId;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("fairness needs at least one rate")]
    NoRates,
    #[error("every rate is zero")]
    AllZeroRates,
    #[error("no data packet was offered in the interval")]
    NoTraffic,
    #[error("empty measurement interval [{start}, {end}]")]
    EmptyInterval { start: SimTime, end: SimTime },
    #[error("no reports to aggregate")]
    NoReports,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: SimTime,
    pub end: SimTime,
}

impl Interval {
    pub fn new(start: SimTime, end: SimTime) -> Result<Self, MetricsError> {
        if end <= start {
            return Err(MetricsError::EmptyInterval { start, end });
        }
        Ok(Interval { start, end })
    }

    /// Half-open on the left: an event at `start` belongs to the previous
    /// interval.
    pub fn contains(&self, t: SimTime) -> bool {
        t > self.start && t <= self.end
    }

    pub fn secs(&self) -> f64 {
        (self.end - self.start).as_secs_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkRecord {
    pub at: SimTime,
    pub flow_id: FlowId,
    pub bytes: u32,
}

/// Everything that happened at the bottleneck queue during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkLog {
    /// Data packets offered to the queue (accepted or dropped).
    pub offered: Vec<LinkRecord>,
    pub dropped: Vec<LinkRecord>,
    /// Completed transmissions.
    pub departed: Vec<LinkRecord>,
}

fn in_interval(records: &[LinkRecord], iv: Interval) -> impl Iterator<Item = &LinkRecord> {
    // records are time-ordered
    let lo = records.partition_point(|r| r.at <= iv.start);
    let hi = records.partition_point(|r| r.at <= iv.end);
    records[lo..hi].iter()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRate {
    pub flow_id: FlowId,
    pub bytes_delivered: u64,
    pub rate_bps: f64,
}

/// `(sum x)^2 / (N * sum x^2)`.
pub fn jain_fairness(rates: &[f64]) -> Result<f64, MetricsError> {
    if rates.is_empty() {
        return Err(MetricsError::NoRates);
    }
    let sum: f64 = rates.iter().sum();
    let sum_sq: f64 = rates.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return Err(MetricsError::AllZeroRates);
    }
    Ok(sum * sum / (rates.len() as f64 * sum_sq))
}

pub fn flow_rates(log: &LinkLog, flows: &[FlowId], iv: Interval) -> Vec<FlowRate> {
    let secs = iv.secs();
    flows
        .iter()
        .map(|&flow_id| {
            let bytes: u64 = in_interval(&log.departed, iv)
                .filter(|r| r.flow_id == flow_id)
                .map(|r| r.bytes as u64)
                .sum();
            FlowRate {
                flow_id,
                bytes_delivered: bytes,
                rate_bps: bytes as f64 * 8.0 / secs,
            }
        })
        .collect()
}

/// Percentage of the link capacity used by completed transmissions,
/// retransmissions included.
pub fn utilization(log: &LinkLog, capacity_bps: u64, iv: Interval) -> f64 {
    let bits: u64 = in_interval(&log.departed, iv).map(|r| r.bytes as u64 * 8).sum();
    bits as f64 / (capacity_bps as f64 * iv.secs()) * 100.0
}

/// `dropped / offered` over the interval, all flows combined.
pub fn loss_rate(log: &LinkLog, iv: Interval) -> Result<f64, MetricsError> {
    let offered = in_interval(&log.offered, iv).count();
    if offered == 0 {
        return Err(MetricsError::NoTraffic);
    }
    let dropped = in_interval(&log.dropped, iv).count();
    Ok(dropped as f64 / offered as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub eta_percent: f64,
    pub fairness: f64,
    pub loss_rate: f64,
    pub interval: Interval,
    pub rates: Vec<FlowRate>,
}

impl MetricsReport {
    pub fn compute(
        log: &LinkLog,
        flows: &[FlowId],
        capacity_bps: u64,
        iv: Interval,
    ) -> Result<Self, MetricsError> {
        let rates = flow_rates(log, flows, iv);
        let xs: Vec<f64> = rates.iter().map(|r| r.rate_bps).collect();
        Ok(MetricsReport {
            eta_percent: utilization(log, capacity_bps, iv),
            fairness: jain_fairness(&xs)?,
            loss_rate: loss_rate(log, iv)?,
            interval: iv,
            rates,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator), 0 for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub runs: usize,
    pub eta: Stat,
    pub fairness: Stat,
    pub loss_rate: Stat,
}

pub fn aggregate_runs(reports: &[MetricsReport]) -> Result<Aggregate, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::NoReports);
    }
    let col = |f: fn(&MetricsReport) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(Aggregate {
        runs: reports.len(),
        eta: col(|r| r.eta_percent),
        fairness: col(|r| r.fairness),
        loss_rate: col(|r| r.loss_rate),
    })
}
