//! Finds intervals where one flow is starved while another dominates the
//! bottleneck.

use thiserror::Error;

use crate::engine::SimTime;
use crate::harness::run::TraceSet;
use crate::network::FlowId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StarvationError {
    #[error("starvation detection needs at least 2 flows, the trace has {0}")]
    UsageError(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarvationParams {
    pub bin: SimTime,
    /// Minimum episode length.
    pub window: SimTime,
    /// A flow is starved below this fraction of its fair share `C/N`.
    pub threshold: f64,
    /// ...while some other flow exceeds this fraction of `C`.
    pub dominant: f64,
}

impl Default for StarvationParams {
    fn default() -> Self {
        StarvationParams {
            bin: SimTime::from_secs(1),
            window: SimTime::from_secs(10),
            threshold: 0.05,
            dominant: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Episode {
    pub flow_id: FlowId,
    pub start: SimTime,
    pub end: SimTime,
}

impl Episode {
    pub fn duration(&self) -> SimTime {
        self.end - self.start
    }
}

/// Bins the delivered bytes of every flow and reports each maximal run of
/// starved bins lasting at least `params.window`. Bins before a flow's
/// start never count as starved.
pub fn detect_starvation(
    set: &TraceSet,
    capacity_bps: u64,
    params: &StarvationParams,
) -> Result<Vec<Episode>, StarvationError> {
    let n = set.flows.len();
    if n < 2 {
        return Err(StarvationError::UsageError(n));
    }
    let bin_us = params.bin.as_micros();
    let end_us = set.summary.final_clock.as_micros();
    let bins = end_us.div_ceil(bin_us) as usize;
    let mut bytes = vec![vec![0u64; bins]; n];
    for r in &set.log.departed {
        // a departure exactly on a boundary belongs to the earlier bin
        let b = (r.at.as_micros().saturating_sub(1) / bin_us) as usize;
        if b < bins {
            bytes[r.flow_id as usize - 1][b] += r.bytes as u64;
        }
    }
    let bin_capacity_bits = capacity_bps as f64 * params.bin.as_secs_f64();
    let fair_bits = bin_capacity_bits / n as f64;
    let bits = |f: usize, b: usize| bytes[f][b] as f64 * 8.0;

    let mut episodes = Vec::new();
    for (f, flow) in set.flows.iter().enumerate() {
        let starved = |b: usize| {
            SimTime::from_micros(b as u64 * bin_us) >= flow.start
                && bits(f, b) < params.threshold * fair_bits
                && (0..n).any(|g| g != f && bits(g, b) > params.dominant * bin_capacity_bits)
        };
        let mut b = 0;
        while b < bins {
            if !starved(b) {
                b += 1;
                continue;
            }
            let first = b;
            while b < bins && starved(b) {
                b += 1;
            }
            let start = SimTime::from_micros(first as u64 * bin_us);
            let end = SimTime::from_micros((b as u64 * bin_us).min(end_us));
            if end - start >= params.window {
                episodes.push(Episode {
                    flow_id: flow.flow_id,
                    start,
                    end,
                });
            }
        }
    }
    Ok(episodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::run_scenario;
    use crate::harness::scenario::preset;

    #[test]
    fn fair_flows_have_no_episodes() {
        let mut sc = preset("fig2b", 1).unwrap();
        sc.duration = SimTime::from_secs(60);
        let (set, _) = run_scenario(&sc).unwrap();
        let eps = detect_starvation(&set, sc.capacity_bps, &StarvationParams::default()).unwrap();
        assert!(eps.is_empty(), "{eps:?}");
    }

    #[test]
    fn single_flow_is_a_usage_error() {
        let mut sc = preset("hs-b40-tcp-alone", 1).unwrap();
        sc.duration = SimTime::from_secs(5);
        let (set, _) = run_scenario(&sc).unwrap();
        assert_eq!(
            detect_starvation(&set, sc.capacity_bps, &StarvationParams::default()),
            Err(StarvationError::UsageError(1))
        );
    }

    #[test]
    fn late_comer_starves_incumbent_on_large_buffer() {
        let mut sc = preset("fig3-bottom", 1).unwrap();
        sc.duration = SimTime::from_secs(100);
        let (set, _) = run_scenario(&sc).unwrap();
        let eps = detect_starvation(&set, sc.capacity_bps, &StarvationParams::default()).unwrap();
        assert_eq!(eps.len(), 1, "{eps:?}");
        assert_eq!(eps[0].flow_id, 1);
        assert!(eps[0].start >= SimTime::from_secs(10) && eps[0].start <= SimTime::from_secs(30));
        assert_eq!(eps[0].end, SimTime::from_secs(100));
    }
}
