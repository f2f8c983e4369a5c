//! Command-line front end.
//!
//! Exit codes: 0 success, 1 acceptance failure, 2 usage or scenario error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engine::SimTime;
use crate::harness::acceptance::{all_passed, run_acceptance, CheckConfig, Fault};
use crate::harness::run::{run_scenario, summary_csv, RunError};
use crate::harness::scenario::{load_scenario, preset, Scenario, ScenarioError};
use crate::harness::starvation::{detect_starvation, StarvationParams};
use crate::harness::table1::{run_table1, to_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ledbat-sim", version, about = "LEDBAT vs TCP bottleneck simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write trace.csv and summary.csv.
    Run(RunArgs),
    /// Run the full parameter grid and write table1.csv.
    Table1(GridArgs),
    /// Run the same-start experiments (fig2a, fig2b, TCP alone).
    Fig2(FigArgs),
    /// Run the staggered-start experiments (fig3-top/mid/bottom).
    Fig3(FigArgs),
    /// Run the acceptance suite; exit 1 if any criterion fails.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory, created if missing.
    #[arg(long, env = "LEDBAT_SIM_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["preset", "scenario"])))]
pub struct RunArgs {
    /// Named preset, e.g. fig2a or table1-ledbat-ledbat-c10-b50-dt10-ssoff.
    #[arg(long)]
    pub preset: Option<String>,
    /// Scenario file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Overrides the seed of the scenario.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trace sampling period in milliseconds.
    #[arg(long)]
    pub sample_ms: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Runs per cell.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct FigArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub sample_ms: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FaultArg {
    /// LEDBAT gain 2/TARGET.
    GainDoubled,
    /// Slow start forced off everywhere.
    NoSlowStart,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Runs per grid cell.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Inject a known misconfiguration.
    #[arg(long, value_enum)]
    pub fault: Option<FaultArg>,
}

#[derive(Debug)]
struct CliError(String);

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        CliError(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError(e.to_string())
    }
}

fn jobs(j: Option<usize>) -> usize {
    j.filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Writes `files` under `dir`, refusing to replace anything unless `force`.
fn write_outputs(dir: &Path, force: bool, files: &[(&str, &[u8])]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError(format!("cannot create {}: {e}", dir.display())))?;
    if !force {
        if let Some((name, _)) = files.iter().find(|(n, _)| dir.join(n).exists()) {
            return Err(CliError(format!(
                "{} already exists (use --force to overwrite)",
                dir.join(name).display()
            )));
        }
    }
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn simulate_into(sc: &Scenario, dir: &Path, force: bool, starvation: bool) -> Result<(), CliError> {
    let (set, report) = run_scenario(sc)?;
    let mut trace = Vec::new();
    set.trace
        .write_csv(&mut trace)
        .map_err(|e| CliError(format!("cannot render trace: {e}")))?;
    let summary = summary_csv(sc, &set, &report);
    let mut files: Vec<(&str, Vec<u8>)> = vec![("trace.csv", trace), ("summary.csv", summary.into_bytes())];
    if starvation {
        let mut s = String::from("flow_id,start_s,end_s\n");
        if let Ok(eps) = detect_starvation(&set, sc.capacity_bps, &StarvationParams::default()) {
            for e in eps {
                s.push_str(&format!("{},{},{}\n", e.flow_id, e.start.as_secs_f64(), e.end.as_secs_f64()));
            }
        }
        files.push(("starvation.csv", s.into_bytes()));
    }
    let refs: Vec<(&str, &[u8])> = files.iter().map(|(n, b)| (*n, b.as_slice())).collect();
    write_outputs(dir, force, &refs)?;
    println!(
        "{}: eta = {:.2}%, F = {:.4}, L = {:.3e} -> {}",
        sc.name,
        report.eta_percent,
        report.fairness,
        report.loss_rate,
        dir.display()
    );
    Ok(())
}

fn with_sampling(mut sc: Scenario, sample_ms: Option<u64>) -> Result<Scenario, CliError> {
    if let Some(ms) = sample_ms {
        sc.sample_interval = SimTime::from_millis(ms);
        sc.validate()?;
    }
    Ok(sc)
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let mut sc = match (&a.preset, &a.scenario) {
        (Some(name), _) => preset(name, a.seed.unwrap_or(1))?,
        (None, Some(path)) => load_scenario(path)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    if let Some(seed) = a.seed {
        sc.seed = seed;
    }
    let sc = with_sampling(sc, a.sample_ms)?;
    simulate_into(&sc, &a.out.out, a.out.force, sc.flows.len() >= 2)
}

fn cmd_figs(names: &[&str], a: &FigArgs, starvation: bool) -> Result<(), CliError> {
    for name in names {
        let sc = with_sampling(preset(name, a.seed)?, a.sample_ms)?;
        simulate_into(&sc, &a.out.out.join(name), a.out.force, starvation && sc.flows.len() >= 2)?;
    }
    Ok(())
}

fn cmd_table1(a: &GridArgs) -> Result<(), CliError> {
    let results = run_table1(a.runs as usize, a.seed, jobs(a.jobs))?;
    let csv = to_csv(&results);
    write_outputs(&a.out.out, a.out.force, &[("table1.csv", csv.as_bytes())])?;
    print!("{csv}");
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> Result<bool, CliError> {
    let cfg = CheckConfig {
        runs: a.runs as usize,
        seed: a.seed,
        jobs: jobs(a.jobs),
        fault: match a.fault {
            None => Fault::None,
            Some(FaultArg::GainDoubled) => Fault::GainDoubled,
            Some(FaultArg::NoSlowStart) => Fault::NoSlowStart,
        },
    };
    let results = run_acceptance(&cfg)?;
    let mut stdout = std::io::stdout().lock();
    for r in &results {
        let _ = writeln!(stdout, "{r}");
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    let _ = writeln!(stdout, "{} of {} criteria passed", results.len() - failed, results.len());
    Ok(all_passed(&results))
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Table1(a) => cmd_table1(a).map(|_| true),
        Command::Fig2(a) => cmd_figs(&["fig2a", "fig2b", "hs-b40-tcp-alone"], a, false).map(|_| true),
        Command::Fig3(a) => cmd_figs(&["fig3-top", "fig3-mid", "fig3-bottom"], a, true).map(|_| true),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
