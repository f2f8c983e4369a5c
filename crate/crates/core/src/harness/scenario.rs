//! Scenario definitions, the scenario file format and named presets.
//!
//! A scenario file is plain `key = value` text. The first non-empty line must
//! be the header `ledbat-sim scenario v1`; `#` starts a comment. Top-level
//! keys describe the bottleneck and the run, and each `[flow]` line opens a
//! new flow section. See `docs/scenario-format.md` for the full key list.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::SimTime;
use crate::ledbat::{Gain, LedbatConfig};
use crate::network::transmission_time;
use crate::tcp::TcpConfig;

pub const HEADER: &str = "ledbat-sim scenario v1";

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Ledbat,
    Tcp,
}

impl FlowKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlowKind::Ledbat => "ledbat",
            FlowKind::Tcp => "tcp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub kind: FlowKind,
    pub start: SimTime,
    pub ledbat: LedbatConfig,
    pub tcp: TcpConfig,
    pub sender_clock_offset_us: i64,
}

impl FlowSpec {
    pub fn new(kind: FlowKind, start_s: f64) -> Self {
        FlowSpec {
            kind,
            start: SimTime::from_secs_f64(start_s),
            ledbat: LedbatConfig::default(),
            tcp: TcpConfig::default(),
            sender_clock_offset_us: 0,
        }
    }

    pub fn ledbat(start_s: f64) -> Self {
        Self::new(FlowKind::Ledbat, start_s)
    }

    pub fn tcp(start_s: f64) -> Self {
        Self::new(FlowKind::Tcp, start_s)
    }

    pub fn slow_start(&self) -> bool {
        match self.kind {
            FlowKind::Ledbat => self.ledbat.slow_start,
            FlowKind::Tcp => self.tcp.slow_start,
        }
    }

    pub fn set_slow_start(&mut self, on: bool) {
        self.ledbat.slow_start = on;
        self.tcp.slow_start = on;
    }
}

/// Start time of the second flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaT {
    Fixed(f64),
    Uniform(f64, f64),
}

impl DeltaT {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            DeltaT::Fixed(s) => s,
            DeltaT::Uniform(lo, hi) => rng.gen_range(lo..hi),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DeltaT::Fixed(s) => format!("{s}"),
            DeltaT::Uniform(lo, hi) => format!("U({lo},{hi})"),
        }
    }

    fn to_text(self) -> String {
        match self {
            DeltaT::Fixed(s) => format!("fixed({s})"),
            DeltaT::Uniform(lo, hi) => format!("uniform({lo},{hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub capacity_bps: u64,
    pub buffer_pkts: usize,
    pub rtt_base_us: u64,
    pub packet_bytes: u32,
    pub duration: SimTime,
    pub flows: Vec<FlowSpec>,
    pub seed: u64,
    /// Overrides the start of the second flow.
    pub delta_t: Option<DeltaT>,
    /// Extra uniform delay `(lo, hi)` seconds added to the second flow start.
    pub start_jitter: Option<(f64, f64)>,
    pub sample_interval: SimTime,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "custom".into(),
            capacity_bps: 10_000_000,
            buffer_pkts: 40,
            rtt_base_us: 50_000,
            packet_bytes: 1500,
            duration: SimTime::from_secs(300),
            flows: Vec::new(),
            seed: 1,
            delta_t: None,
            start_jitter: None,
            sample_interval: SimTime::from_millis(10),
        }
    }
}

impl Scenario {
    pub fn bdp_bytes(&self) -> f64 {
        self.capacity_bps as f64 * self.rtt_base_us as f64 / 1e6 / 8.0
    }

    pub fn bdp_pkts(&self) -> f64 {
        self.bdp_bytes() / self.packet_bytes as f64
    }

    /// Queue length in packets equivalent to `delay_us` of queuing.
    pub fn delay_in_pkts(&self, delay_us: f64) -> f64 {
        delay_us / self.service_time().as_micros() as f64
    }

    pub fn service_time(&self) -> SimTime {
        transmission_time(self.packet_bytes, self.capacity_bps)
    }

    /// Half the base RTT is spent on the ack path; the other half is
    /// transmission plus propagation of a data packet over an idle link.
    pub fn ack_delay(&self) -> SimTime {
        SimTime::from_micros(self.rtt_base_us / 2)
    }

    pub fn data_prop_delay(&self) -> SimTime {
        SimTime::from_micros(self.rtt_base_us - self.rtt_base_us / 2).saturating_sub(self.service_time())
    }

    /// Concrete start time of every flow, drawing `delta_t` and the jitter
    /// from the scenario seed.
    pub fn resolve_starts(&self) -> Vec<SimTime> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut starts: Vec<SimTime> = self.flows.iter().map(|f| f.start).collect();
        if starts.len() >= 2 {
            let mut second = starts[1].as_secs_f64();
            if let Some(dt) = self.delta_t {
                second = dt.sample(&mut rng);
            }
            if let Some((lo, hi)) = self.start_jitter {
                second += rng.gen_range(lo..hi);
            }
            starts[1] = SimTime::from_secs_f64(second);
        }
        starts
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Validation(m));
        if self.capacity_bps == 0 {
            return bad("capacity_bps must be positive".into());
        }
        if self.buffer_pkts == 0 {
            return bad("buffer_pkts must be positive".into());
        }
        if self.packet_bytes == 0 {
            return bad("packet_bytes must be positive".into());
        }
        if self.duration == SimTime::ZERO {
            return bad("duration_s must be positive".into());
        }
        if self.sample_interval == SimTime::ZERO {
            return bad("sample_ms must be positive".into());
        }
        if self.flows.is_empty() {
            return bad("at least one [flow] is required".into());
        }
        if self.flows.len() > u16::MAX as usize - 1 {
            return bad("too many flows".into());
        }
        if self.ack_delay() + self.service_time() > SimTime::from_micros(self.rtt_base_us) {
            return bad(format!(
                "rtt_base_us {} is shorter than one packet transmission plus the return path",
                self.rtt_base_us
            ));
        }
        if (self.delta_t.is_some() || self.start_jitter.is_some()) && self.flows.len() < 2 {
            return bad("delta_t and start_jitter need a second flow".into());
        }
        match self.delta_t {
            Some(DeltaT::Fixed(s)) if !(s >= 0.0) => return bad(format!("delta_t {s} is negative")),
            Some(DeltaT::Uniform(lo, hi)) if !(lo >= 0.0 && hi > lo) => {
                return bad(format!("delta_t uniform({lo},{hi}) is not a valid range"))
            }
            _ => {}
        }
        if let Some((lo, hi)) = self.start_jitter {
            if !(lo >= 0.0 && hi > lo) {
                return bad(format!("start_jitter uniform({lo},{hi}) is not a valid range"));
            }
        }
        for (i, f) in self.flows.iter().enumerate() {
            if f.start >= self.duration {
                return bad(format!("flow {} starts after the end of the run", i + 1));
            }
            f.ledbat
                .validate()
                .map_err(|e| ScenarioError::Validation(format!("flow {}: {e}", i + 1)))?;
            if !(f.tcp.initial_cwnd_pkts >= 1.0) {
                return bad(format!("flow {}: initial_cwnd must be at least 1", i + 1));
            }
        }
        Ok(())
    }

    /// Renders the scenario in the file format accepted by [`parse_scenario`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let onoff = |b: bool| if b { "on" } else { "off" };
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "name = {}", self.name).unwrap();
        writeln!(s, "capacity_bps = {}", self.capacity_bps).unwrap();
        writeln!(s, "buffer_pkts = {}", self.buffer_pkts).unwrap();
        writeln!(s, "rtt_base_us = {}", self.rtt_base_us).unwrap();
        writeln!(s, "packet_bytes = {}", self.packet_bytes).unwrap();
        writeln!(s, "duration_s = {}", self.duration.as_secs_f64()).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "sample_ms = {}", self.sample_interval.as_micros() as f64 / 1000.0).unwrap();
        if let Some(dt) = self.delta_t {
            writeln!(s, "delta_t = {}", dt.to_text()).unwrap();
        }
        if let Some((lo, hi)) = self.start_jitter {
            writeln!(s, "start_jitter = uniform({lo},{hi})").unwrap();
        }
        for f in &self.flows {
            writeln!(s, "\n[flow]").unwrap();
            writeln!(s, "kind = {}", f.kind.as_str()).unwrap();
            writeln!(s, "start_s = {}", f.start.as_secs_f64()).unwrap();
            writeln!(s, "slow_start = {}", onoff(f.slow_start())).unwrap();
            if f.sender_clock_offset_us != 0 {
                writeln!(s, "sender_clock_offset_us = {}", f.sender_clock_offset_us).unwrap();
            }
            match f.kind {
                FlowKind::Tcp => {
                    writeln!(s, "initial_cwnd = {}", f.tcp.initial_cwnd_pkts).unwrap();
                }
                FlowKind::Ledbat => {
                    let l = &f.ledbat;
                    writeln!(s, "initial_cwnd = {}", l.initial_cwnd_pkts).unwrap();
                    writeln!(s, "target_ms = {}", l.target_us as f64 / 1000.0).unwrap();
                    if l.gain == Gain::one_over(l.target_us) {
                        writeln!(s, "gain_mode = one_over_target").unwrap();
                    } else {
                        writeln!(s, "gain_mode = explicit").unwrap();
                        writeln!(s, "gain = {}/{}", l.gain.num, l.gain.den).unwrap();
                    }
                    writeln!(s, "min_cwnd = {}", l.min_cwnd_pkts).unwrap();
                    writeln!(s, "pacing = {}", onoff(l.pacing)).unwrap();
                    writeln!(s, "base_histo_min = {}", l.base_histo_minutes).unwrap();
                    writeln!(s, "clock_offset_us = {}", l.clock_offset_us).unwrap();
                    if l.pin_queuing_delay_to_zero {
                        writeln!(s, "pin_queuing_zero = on").unwrap();
                    }
                }
            }
        }
        s
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_scenario(&text)
}

#[derive(Default)]
struct FlowDraft {
    line: usize,
    kind: Option<FlowKind>,
    start_s: f64,
    slow_start: bool,
    initial_cwnd: Option<f64>,
    target_ms: Option<f64>,
    gain_mode: Option<String>,
    gain: Option<Gain>,
    min_cwnd: Option<f64>,
    pacing: Option<bool>,
    base_histo: Option<u32>,
    clock_offset_us: i64,
    sender_clock_offset_us: i64,
    pin_zero: bool,
}

impl FlowDraft {
    fn build(self) -> Result<FlowSpec, ScenarioError> {
        let kind = self.kind.ok_or(ScenarioError::Parse {
            line: self.line,
            message: "flow section without `kind`".into(),
        })?;
        let mut f = FlowSpec::new(kind, self.start_s);
        f.set_slow_start(self.slow_start);
        f.sender_clock_offset_us = self.sender_clock_offset_us;
        if let Some(w) = self.initial_cwnd {
            f.tcp.initial_cwnd_pkts = w;
            f.ledbat.initial_cwnd_pkts = w;
        }
        let l = &mut f.ledbat;
        if let Some(ms) = self.target_ms {
            l.target_us = (ms * 1000.0).round() as u64;
        }
        l.gain = match (self.gain_mode.as_deref(), self.gain) {
            (None | Some("one_over_target"), None) => Gain::one_over(l.target_us),
            (Some("explicit"), Some(g)) => g,
            (Some("explicit"), None) => {
                return Err(ScenarioError::Validation("gain_mode = explicit needs `gain`".into()))
            }
            (_, Some(_)) => {
                return Err(ScenarioError::Validation("`gain` requires gain_mode = explicit".into()))
            }
            (Some(other), None) => {
                return Err(ScenarioError::Validation(format!("unknown gain_mode `{other}`")))
            }
        };
        if let Some(m) = self.min_cwnd {
            l.min_cwnd_pkts = m;
        }
        if let Some(p) = self.pacing {
            l.pacing = p;
        }
        if let Some(h) = self.base_histo {
            l.base_histo_minutes = h;
        }
        l.clock_offset_us = self.clock_offset_us;
        l.pin_queuing_delay_to_zero = self.pin_zero;
        Ok(f)
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ScenarioError> {
    v.parse().map_err(|_| ScenarioError::Parse {
        line,
        message: format!("`{key}`: cannot parse `{v}`"),
    })
}

fn parse_onoff(line: usize, key: &str, v: &str) -> Result<bool, ScenarioError> {
    match v {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(ScenarioError::Parse {
            line,
            message: format!("`{key}`: expected on/off, got `{v}`"),
        }),
    }
}

/// Parses `name(a,b,...)` into its numeric arguments.
fn parse_call(line: usize, key: &str, v: &str, name: &str) -> Result<Option<Vec<f64>>, ScenarioError> {
    let Some(rest) = v.strip_prefix(name) else {
        return Ok(None);
    };
    let inner = rest
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or(ScenarioError::Parse {
            line,
            message: format!("`{key}`: malformed `{v}`"),
        })?;
    inner
        .split(',')
        .map(|a| parse_num::<f64>(line, key, a.trim()))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn parse_range(line: usize, key: &str, v: &str) -> Result<(f64, f64), ScenarioError> {
    match parse_call(line, key, v, "uniform")? {
        Some(args) if args.len() == 2 => Ok((args[0], args[1])),
        _ => Err(ScenarioError::Parse {
            line,
            message: format!("`{key}`: expected uniform(lo,hi), got `{v}`"),
        }),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        Some((line, h)) => {
            return Err(ScenarioError::Parse {
                line,
                message: format!("expected header `{HEADER}`, got `{h}`"),
            })
        }
        None => {
            return Err(ScenarioError::Parse {
                line: 1,
                message: "empty scenario file".into(),
            })
        }
    }

    let mut sc = Scenario::default();
    let mut drafts: Vec<FlowDraft> = Vec::new();
    for (line, l) in lines {
        if l == "[flow]" {
            drafts.push(FlowDraft {
                line,
                ..Default::default()
            });
            continue;
        }
        let (key, value) = l.split_once('=').ok_or(ScenarioError::Parse {
            line,
            message: format!("expected `key = value`, got `{l}`"),
        })?;
        let (key, v) = (key.trim(), value.trim());
        if let Some(f) = drafts.last_mut() {
            match key {
                "kind" => {
                    f.kind = Some(match v {
                        "ledbat" => FlowKind::Ledbat,
                        "tcp" => FlowKind::Tcp,
                        _ => {
                            return Err(ScenarioError::Validation(format!(
                                "line {line}: unknown flow kind `{v}`"
                            )))
                        }
                    })
                }
                "start_s" => f.start_s = parse_num(line, key, v)?,
                "slow_start" => f.slow_start = parse_onoff(line, key, v)?,
                "initial_cwnd" => f.initial_cwnd = Some(parse_num(line, key, v)?),
                "target_ms" => f.target_ms = Some(parse_num(line, key, v)?),
                "gain_mode" => f.gain_mode = Some(v.to_string()),
                "gain" => {
                    let (n, d) = v.split_once('/').ok_or(ScenarioError::Parse {
                        line,
                        message: format!("`gain`: expected num/den, got `{v}`"),
                    })?;
                    f.gain = Some(Gain {
                        num: parse_num(line, key, n.trim())?,
                        den: parse_num(line, key, d.trim())?,
                    });
                }
                "min_cwnd" => f.min_cwnd = Some(parse_num(line, key, v)?),
                "pacing" => f.pacing = Some(parse_onoff(line, key, v)?),
                "base_histo_min" => f.base_histo = Some(parse_num(line, key, v)?),
                "clock_offset_us" => f.clock_offset_us = parse_num(line, key, v)?,
                "sender_clock_offset_us" => f.sender_clock_offset_us = parse_num(line, key, v)?,
                "pin_queuing_zero" => f.pin_zero = parse_onoff(line, key, v)?,
                _ => {
                    return Err(ScenarioError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
            continue;
        }
        match key {
            "name" => sc.name = v.to_string(),
            "capacity_bps" => sc.capacity_bps = parse_num(line, key, v)?,
            "buffer_pkts" => {
                let b: i64 = parse_num(line, key, v)?;
                if b <= 0 {
                    return Err(ScenarioError::Validation(format!("buffer_pkts must be positive, got {b}")));
                }
                sc.buffer_pkts = b as usize;
            }
            "rtt_base_us" => sc.rtt_base_us = parse_num(line, key, v)?,
            "packet_bytes" => sc.packet_bytes = parse_num(line, key, v)?,
            "duration_s" => sc.duration = SimTime::from_secs_f64(parse_num(line, key, v)?),
            "seed" => sc.seed = parse_num(line, key, v)?,
            "sample_ms" => sc.sample_interval = SimTime::from_secs_f64(parse_num::<f64>(line, key, v)? / 1e3),
            "delta_t" => {
                sc.delta_t = Some(if let Some(a) = parse_call(line, key, v, "fixed")? {
                    match a.as_slice() {
                        [s] => DeltaT::Fixed(*s),
                        _ => {
                            return Err(ScenarioError::Parse {
                                line,
                                message: "`delta_t`: fixed takes one argument".into(),
                            })
                        }
                    }
                } else {
                    let (lo, hi) = parse_range(line, key, v)?;
                    DeltaT::Uniform(lo, hi)
                })
            }
            "start_jitter" => {
                sc.start_jitter = match v {
                    "none" | "off" => None,
                    _ => Some(parse_range(line, key, v)?),
                }
            }
            _ => {
                return Err(ScenarioError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }
    sc.flows = drafts.into_iter().map(FlowDraft::build).collect::<Result<_, _>>()?;
    sc.validate()?;
    Ok(sc)
}

/// Which pair of controllers shares the bottleneck in a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mix {
    TcpLedbat,
    LedbatLedbat,
}

impl Mix {
    pub fn label(&self) -> &'static str {
        match self {
            Mix::TcpLedbat => "tcp-ledbat",
            Mix::LedbatLedbat => "ledbat-ledbat",
        }
    }
}

/// Base-delay history used by the parameter grid and the homogeneous-start
/// presets. Ten minutes outlasts a 300 s run, so no minimum ever expires.
pub const LONG_BASE_HISTO_MIN: u32 = 10;

/// One grid cell: the first flow starts at 0, the second after `delta_t`
/// (jittered by U(0, 0.1) s for fixed gaps).
pub fn table1_scenario(mix: Mix, capacity_mbps: u64, buffer_pkts: usize, delta_t: DeltaT, slow_start: bool, seed: u64) -> Scenario {
    let first = match mix {
        Mix::TcpLedbat => FlowSpec::tcp(0.0),
        Mix::LedbatLedbat => FlowSpec::ledbat(0.0),
    };
    let mut flows = vec![first, FlowSpec::ledbat(0.0)];
    for f in &mut flows {
        f.set_slow_start(slow_start);
        if f.kind == FlowKind::Ledbat {
            f.ledbat.base_histo_minutes = LONG_BASE_HISTO_MIN;
        }
    }
    Scenario {
        name: format!(
            "table1-{}-c{}-b{}-dt{}-ss{}",
            mix.label(),
            capacity_mbps,
            buffer_pkts,
            match delta_t {
                DeltaT::Fixed(s) => format!("{s}"),
                DeltaT::Uniform(..) => "u".into(),
            },
            if slow_start { "on" } else { "off" }
        ),
        capacity_bps: capacity_mbps * 1_000_000,
        buffer_pkts,
        flows,
        seed,
        delta_t: Some(delta_t),
        start_jitter: match delta_t {
            DeltaT::Fixed(_) => Some((0.0, 0.1)),
            DeltaT::Uniform(..) => None,
        },
        ..Default::default()
    }
}

fn two_flow(name: &str, capacity_bps: u64, buffer_pkts: usize, flows: Vec<FlowSpec>) -> Scenario {
    Scenario {
        name: name.into(),
        capacity_bps,
        buffer_pkts,
        flows,
        ..Default::default()
    }
}

pub const PRESETS: &[&str] = &[
    "hs-b40-tcp-vs-ledbat",
    "fig2a",
    "fig2b",
    "hs-b40-tcp-alone",
    "hs-b40-tcp-vs-tcp",
    "hs-b40-ledbat-alone",
    "fig3-top",
    "fig3-mid",
    "fig3-bottom",
    "adsl-down-b10-tcp-vs-ledbat",
    "adsl-up-b10-tcp-vs-ledbat",
];

/// Resolves a preset name. Besides [`PRESETS`], grid cells are available
/// as `table1-<tcp-ledbat|ledbat-ledbat>-c<2|10>-b<B>-dt<2|10|u>-ss<on|off>`.
pub fn preset(name: &str, seed: u64) -> Result<Scenario, ScenarioError> {
    const HS: u64 = 10_000_000;
    let mut s = match name {
        "hs-b40-tcp-vs-ledbat" | "fig2a" => {
            two_flow(name, HS, 40, vec![FlowSpec::tcp(0.0), FlowSpec::ledbat(0.0)])
        }
        "fig2b" => two_flow(name, HS, 40, vec![FlowSpec::ledbat(0.0), FlowSpec::ledbat(0.0)]),
        "hs-b40-tcp-alone" => two_flow(name, HS, 40, vec![FlowSpec::tcp(0.0)]),
        "hs-b40-ledbat-alone" => two_flow(name, HS, 40, vec![FlowSpec::ledbat(0.0)]),
        "hs-b40-tcp-vs-tcp" => two_flow(name, HS, 40, vec![FlowSpec::tcp(0.0), FlowSpec::tcp(0.0)]),
        "fig3-top" => two_flow(name, HS, 40, vec![FlowSpec::ledbat(0.0), FlowSpec::ledbat(2.0)]),
        "fig3-mid" => two_flow(name, HS, 40, vec![FlowSpec::ledbat(0.0), FlowSpec::ledbat(10.0)]),
        "fig3-bottom" => two_flow(name, HS, 100, vec![FlowSpec::ledbat(0.0), FlowSpec::ledbat(10.0)]),
        "adsl-down-b10-tcp-vs-ledbat" => {
            two_flow(name, 2_000_000, 10, vec![FlowSpec::tcp(0.0), FlowSpec::ledbat(0.0)])
        }
        "adsl-up-b10-tcp-vs-ledbat" => {
            two_flow(name, 500_000, 10, vec![FlowSpec::tcp(0.0), FlowSpec::ledbat(0.0)])
        }
        _ => parse_table1_name(name, seed).ok_or_else(|| ScenarioError::UnknownPreset(name.into()))?,
    };
    // the fig3 presets keep the short default history so its rollover shows up
    if !name.starts_with("fig3-") {
        for f in s.flows.iter_mut().filter(|f| f.kind == FlowKind::Ledbat) {
            f.ledbat.base_histo_minutes = LONG_BASE_HISTO_MIN;
        }
    }
    s.seed = seed;
    s.validate()?;
    Ok(s)
}

fn parse_table1_name(name: &str, seed: u64) -> Option<Scenario> {
    let rest = name.strip_prefix("table1-")?;
    let (mix, rest) = if let Some(r) = rest.strip_prefix("tcp-ledbat-") {
        (Mix::TcpLedbat, r)
    } else {
        (Mix::LedbatLedbat, rest.strip_prefix("ledbat-ledbat-")?)
    };
    let parts: Vec<&str> = rest.split('-').collect();
    let [c, b, dt, ss] = parts.as_slice() else {
        return None;
    };
    let c: u64 = c.strip_prefix('c')?.parse().ok()?;
    let b: usize = b.strip_prefix('b')?.parse().ok()?;
    let dt = match dt.strip_prefix("dt")? {
        "u" => DeltaT::Uniform(0.0, 10.0),
        s => DeltaT::Fixed(s.parse().ok()?),
    };
    let ss = match ss.strip_prefix("ss")? {
        "on" => true,
        "off" => false,
        _ => return None,
    };
    if c == 0 || b == 0 {
        return None;
    }
    Some(table1_scenario(mix, c, b, dt, ss, seed))
}
