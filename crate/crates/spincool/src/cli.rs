//! Command-line front end.
//!
//! Subcommands: `analyze`, `simulate`, `scan`, `grape`, `parse-check`.
//! Exit codes: 0 success, 1 usage error, 2 configuration/parse error,
//! 3 numerical failure (pulse optimization ended below its target
//! fidelity). Error paths write nothing to `--out` destinations; output
//! files are produced with fixed formatting so identical invocations give
//! byte-identical files. `SPINCOOL_THREADS` overrides the worker-thread
//! count used by `scan` and `grape`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::engine::{self, DelayAxis};
use crate::error::{Error, Result};
use crate::gates::GateModel;
use crate::grape::{self, GrapeConfig, OptimizeConfig, PulseInit, PulseOutput};
use crate::sequence::{self, ProcessKind};
use crate::system::{DiagonalState, SpinSystem};

#[derive(Debug, Parser)]
#[command(
    name = "spincool",
    version,
    about = "Simulate and optimize algorithmic cooling of nuclear-spin ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print equilibrium analytics of a spin system as JSON
    Analyze {
        /// Spin-system JSON file
        #[arg(long, value_name = "FILE")]
        system: PathBuf,
    },
    /// Run a cooling process or a DSL sequence and write the trajectory
    Simulate(SimulateArgs),
    /// Exhaustively scan process delays for the best objective
    Scan(ScanArgs),
    /// Optimize a robust control pulse from a job config
    Grape {
        /// Pulse-design job JSON file
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Output pulse JSON path
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Optional CSV export of the slice table
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Validate a sequence file, reporting the first error with line:col
    ParseCheck {
        /// Sequence file (.seq)
        #[arg(long, value_name = "FILE")]
        sequence: PathBuf,
        /// Optional system file; with it, spin names are validated too
        #[arg(long, value_name = "FILE")]
        system: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["process", "sequence"])))]
struct SimulateArgs {
    /// Spin-system JSON file
    #[arg(long, value_name = "FILE")]
    system: PathBuf,
    /// Process template to run (1, 2 or 3)
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    process: Option<u8>,
    /// Sequence file to run instead of a template
    #[arg(long, value_name = "FILE", conflicts_with_all = ["rounds", "d2", "d3", "d4", "d5"])]
    sequence: Option<PathBuf>,
    /// Cooling rounds for the template
    #[arg(long, default_value_t = 7)]
    rounds: u32,
    /// Override the template delay D2, seconds
    #[arg(long = "D2", value_name = "SECONDS")]
    d2: Option<f64>,
    /// Override the template delay D3, seconds
    #[arg(long = "D3", value_name = "SECONDS")]
    d3: Option<f64>,
    /// Override the template delay D4, seconds
    #[arg(long = "D4", value_name = "SECONDS")]
    d4: Option<f64>,
    /// Override the template delay D5, seconds
    #[arg(long = "D5", value_name = "SECONDS")]
    d5: Option<f64>,
    /// Polarization-exchange gate efficiency
    #[arg(long = "eta-pe", default_value_t = 1.0)]
    eta_pe: f64,
    /// Compression gate efficiency
    #[arg(long = "eta-comp", default_value_t = 1.0)]
    eta_comp: f64,
    /// Trajectory CSV path; a JSON mirror is written next to it
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Spin-system JSON file
    #[arg(long, value_name = "FILE")]
    system: PathBuf,
    /// Process template to scan (1, 2 or 3)
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    process: u8,
    /// Grid spec, e.g. "D2=1:10:1,D3=1:10:1" (min:max:step, inclusive)
    #[arg(long)]
    grid: String,
    /// Objective, e.g. "ic:C1" or "ic:C1,C2"
    #[arg(long)]
    objective: String,
    /// Cooling rounds per grid point
    #[arg(long, default_value_t = 7)]
    rounds: u32,
    /// Polarization-exchange gate efficiency
    #[arg(long = "eta-pe", default_value_t = 1.0)]
    eta_pe: f64,
    /// Compression gate efficiency
    #[arg(long = "eta-comp", default_value_t = 1.0)]
    eta_comp: f64,
    /// Optional JSON output with the optimum and the full surface
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Parses argv and runs; returns the process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    init_threads();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn init_threads() {
    if let Ok(value) = std::env::var("SPINCOOL_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze { system } => {
            let system = SpinSystem::load(&system)?;
            let report = engine::analyze(&system);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(0)
        }
        Command::Simulate(args) => simulate(args),
        Command::Scan(args) => scan(args),
        Command::Grape { config, out, csv } => run_grape(&config, &out, csv.as_deref()),
        Command::ParseCheck { sequence, system } => parse_check(&sequence, system.as_deref()),
    }
}

fn read_sequence_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))
}

/// Prefixes parse errors with the file they came from.
fn located(err: Error, path: &Path) -> Error {
    match err {
        Error::Parse { line, col, msg } => Error::Parse {
            line,
            col,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    }
}

fn simulate(args: SimulateArgs) -> Result<i32> {
    let system = SpinSystem::load(&args.system)?;
    let model = GateModel::new(args.eta_pe, args.eta_comp)?;
    let seq = match (&args.process, &args.sequence) {
        (Some(k), None) => {
            let kind = ProcessKind::from_number(*k)?;
            let mut delays = kind.default_delays();
            for (name, value) in [
                ("D2", args.d2),
                ("D3", args.d3),
                ("D4", args.d4),
                ("D5", args.d5),
            ] {
                if let Some(v) = value {
                    if !delays.contains_key(name) {
                        return Err(Error::Config(format!(
                            "process {k} does not use delay {name}"
                        )));
                    }
                    delays.insert(name.to_string(), v);
                }
            }
            sequence::build_process(kind, &system, &delays, args.rounds)?
        }
        (None, Some(path)) => {
            let text = read_sequence_file(path)?;
            sequence::parse_sequence(&text, &system).map_err(|e| located(e, path))?
        }
        _ => unreachable!("clap enforces exactly one source"),
    };
    let traj = engine::run(&seq, &model, &DiagonalState::equilibrium(&system))?;
    let csv = traj.to_csv();
    let json = serde_json::to_string_pretty(&traj.to_json())?;
    std::fs::write(&args.out, csv)?;
    std::fs::write(args.out.with_extension("json"), json)?;
    let final_rec = traj.final_record();
    eprintln!(
        "wrote {} ({} records, final round {})",
        args.out.display(),
        traj.records.len(),
        final_rec.round
    );
    Ok(0)
}

fn parse_grid(text: &str) -> Result<BTreeMap<String, DelayAxis>> {
    let mut grid = BTreeMap::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, axis) = part.split_once('=').ok_or_else(|| {
            Error::Parameter(format!("grid entry `{part}` is not NAME=min:max:step"))
        })?;
        let fields: Vec<&str> = axis.split(':').collect();
        if fields.len() != 3 {
            return Err(Error::Parameter(format!(
                "grid entry `{part}` is not NAME=min:max:step"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad number `{s}` in grid spec")))
        };
        grid.insert(
            name.trim().to_string(),
            DelayAxis {
                min: parse(fields[0])?,
                max: parse(fields[1])?,
                step: parse(fields[2])?,
            },
        );
    }
    if grid.is_empty() {
        return Err(Error::Parameter("empty grid spec".into()));
    }
    Ok(grid)
}

fn parse_objective(text: &str) -> Result<Vec<String>> {
    let spins = text
        .strip_prefix("ic:")
        .ok_or_else(|| Error::Parameter(format!("objective `{text}` must look like ic:SPIN[,SPIN...]")))?;
    let names: Vec<String> = spins
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(Error::Parameter("objective names no spins".into()));
    }
    Ok(names)
}

fn scan(args: ScanArgs) -> Result<i32> {
    let system = SpinSystem::load(&args.system)?;
    let kind = ProcessKind::from_number(args.process)?;
    let grid = parse_grid(&args.grid)?;
    let objective = parse_objective(&args.objective)?;
    let model = GateModel::new(args.eta_pe, args.eta_comp)?;
    let outcome = engine::scan_delays(kind, &system, &grid, &objective, args.rounds, &model)?;
    println!("{}", serde_json::to_string_pretty(&outcome.best)?);
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&outcome)?)?;
        eprintln!("wrote {} ({} grid points)", out.display(), outcome.surface.len());
    }
    Ok(0)
}

fn run_grape(config_path: &Path, out: &Path, csv: Option<&Path>) -> Result<i32> {
    let config = GrapeConfig::load(config_path)?;
    let problem = config.to_problem()?;
    let opt = OptimizeConfig {
        max_iters: config.optimizer.max_iters,
        tol: config.optimizer.tol,
        init_step: config.optimizer.init_step,
        min_step: config.optimizer.min_step,
    };
    let outcome = grape::optimize(&problem, PulseInit::Random { seed: config.seed }, &opt)?;
    if let Some(target) = config.optimizer.target_fidelity {
        if outcome.fidelity < target {
            eprintln!(
                "error: optimization reached fidelity {:.6} < target {target} \
                 (stagnated: {}); nothing written",
                outcome.fidelity, outcome.stagnated
            );
            return Ok(3);
        }
    }
    let output = PulseOutput::new(&problem, &outcome, config.seed);
    std::fs::write(out, serde_json::to_string_pretty(&output)?)?;
    if let Some(csv_path) = csv {
        std::fs::write(csv_path, output.to_csv())?;
    }
    eprintln!(
        "wrote {} (mean fidelity {:.6}, {} iterations)",
        out.display(),
        outcome.fidelity,
        outcome.iterations
    );
    Ok(0)
}

fn parse_check(sequence: &Path, system: Option<&Path>) -> Result<i32> {
    let text = read_sequence_file(sequence)?;
    match system {
        Some(sys_path) => {
            let system = SpinSystem::load(sys_path)?;
            sequence::parse_sequence(&text, &system).map_err(|e| located(e, sequence))?;
        }
        None => {
            sequence::check_syntax(&text).map_err(|e| located(e, sequence))?;
        }
    }
    println!("ok");
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parsing() {
        let grid = parse_grid("D2=1:10:1,D3=0.5:3:0.5").unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(grid["D2"].max, 10.0);
        assert_eq!(grid["D3"].step, 0.5);
        assert!(parse_grid("D2=1:10").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn objective_parsing() {
        assert_eq!(parse_objective("ic:C1").unwrap(), vec!["C1".to_string()]);
        assert_eq!(
            parse_objective("ic:C1,C2").unwrap(),
            vec!["C1".to_string(), "C2".to_string()]
        );
        assert!(parse_objective("pol:C1").is_err());
        assert!(parse_objective("ic:").is_err());
    }
}
