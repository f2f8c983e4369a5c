//! Time series recorded during a run and their CSV form.

use std::fmt;
use std::io::{self, Write};

use crate::engine::SimTime;
use crate::network::FlowId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entity {
    Link,
    Flow(FlowId),
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Link => write!(f, "link"),
            Entity::Flow(id) => write!(f, "flow{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Series {
    /// Sender window, packets.
    CwndPkts,
    /// Packets waiting in the bottleneck buffer, the one in service excluded.
    QueuePkts,
    /// Time to drain the bottleneck backlog, microseconds.
    QueueDelayUs,
    /// One row per dropped packet; the value is its sequence number.
    Drop,
    /// Cumulative bytes of the flow that finished transmission.
    Delivery,
    BaseDelayUs,
    QueuingEstUs,
    /// One row per window halving; the value is the window afterwards.
    Halving,
    /// One row per safety timeout.
    Timeout,
}

impl Series {
    pub fn as_str(&self) -> &'static str {
        match self {
            Series::CwndPkts => "cwnd_pkts",
            Series::QueuePkts => "queue_pkts",
            Series::QueueDelayUs => "queue_delay_us",
            Series::Drop => "drop",
            Series::Delivery => "delivery",
            Series::BaseDelayUs => "base_delay_us",
            Series::QueuingEstUs => "queuing_est_us",
            Series::Halving => "halving",
            Series::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: SimTime,
    pub entity: Entity,
    pub series: Series,
    pub value: f64,
}

pub const CSV_HEADER: &str = "t_us,entity,series,value";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn push(&mut self, t: SimTime, entity: Entity, series: Series, value: f64) {
        self.rows.push(TraceRow {
            t,
            entity,
            series,
            value,
        });
    }

    /// `(t, value)` pairs of one series, in time order.
    pub fn series(&self, entity: Entity, series: Series) -> Vec<(SimTime, f64)> {
        self.rows
            .iter()
            .filter(|r| r.entity == entity && r.series == series)
            .map(|r| (r.t, r.value))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.t.as_micros(), r.entity, r.series.as_str(), r.value)?;
        }
        w.flush()
    }
}

/// Value of a step series at `t`: the last sample at or before `t`.
pub fn value_at(series: &[(SimTime, f64)], t: SimTime) -> Option<f64> {
    let i = series.partition_point(|(at, _)| *at <= t);
    i.checked_sub(1).map(|i| series[i].1)
}

/// Time average of the samples that fall in `[from, to]`.
pub fn mean_over(series: &[(SimTime, f64)], from: SimTime, to: SimTime) -> Option<f64> {
    let xs: Vec<f64> = series
        .iter()
        .filter(|(t, _)| *t >= from && *t <= to)
        .map(|(_, v)| *v)
        .collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Trace::default();
        t.push(SimTime::from_millis(10), Entity::Flow(1), Series::CwndPkts, 2.5);
        t.push(SimTime::from_millis(10), Entity::Link, Series::QueuePkts, 3.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t_us,entity,series,value\n10000,flow1,cwnd_pkts,2.5\n10000,link,queue_pkts,3\n"
        );
    }

    #[test]
    fn step_lookup_and_mean() {
        let s = vec![(SimTime::from_secs(1), 1.0), (SimTime::from_secs(2), 3.0)];
        assert_eq!(value_at(&s, SimTime::ZERO), None);
        assert_eq!(value_at(&s, SimTime::from_millis(1500)), Some(1.0));
        assert_eq!(value_at(&s, SimTime::from_secs(5)), Some(3.0));
        assert_eq!(mean_over(&s, SimTime::ZERO, SimTime::from_secs(2)), Some(2.0));
        assert_eq!(mean_over(&s, SimTime::from_secs(3), SimTime::from_secs(4)), None);
    }
}
