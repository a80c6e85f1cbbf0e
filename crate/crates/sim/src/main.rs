use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use strider::formats::{base_dir, read_gait, read_json, read_model, to_json_string, write_gait, FormatError};
use strider::report::{load_runs, table};
use strider::run::{run_scenario, RunError};
use strider::scenario::Scenario;
use strider::sweep::{expand, sweep, Grid, ReportRow};
use strider_core::gait::{check_gait, synthesize_gait, GaitBounds, SynthParams};

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_FELL: u8 = 3;

#[derive(Parser)]
#[command(name = "strider", version, about = "Planar biped walking simulator with adaptive foot placement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Synthesize or check gait files.
    #[command(subcommand)]
    Gait(GaitCommand),
    /// Print the comparison table for finished runs.
    Report {
        #[arg(long)]
        runs: PathBuf,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run one scenario; writes trace.csv and summary.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario grid; writes report.json and one directory per run.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run the scenarios one after another.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Subcommand)]
enum GaitCommand {
    /// Build a periodic gait for a model.
    Synth {
        #[arg(long)]
        params: PathBuf,
        /// Robot model JSON; the built-in plant when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a gait against the walking constraints.
    Check {
        #[arg(long)]
        gait: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Bounds JSON; defaults when omitted.
        #[arg(long)]
        bounds: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure {
            code: EXIT_INVALID,
            msg: e.to_string(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure {
            code: EXIT_INVALID,
            msg: e.to_string(),
        }
    }
}

fn model_or_default(path: Option<&Path>) -> Result<strider_core::model::RobotModel, FormatError> {
    match path {
        Some(p) => read_model(p),
        None => Ok(strider_core::model::RobotModel::planar_biped()),
    }
}

fn execute(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Sim(SimCommand::Run { scenario, out }) => {
            let sc: Scenario = read_json(&scenario)?;
            let summary = run_scenario(&sc, &base_dir(&scenario), &out)?;
            print!("{}", table(&[ReportRow::from_summary(&summary)]));
            if summary.fell {
                eprintln!("run fell: {}", summary.fall_reason.as_deref().unwrap_or("unknown"));
                return Ok(EXIT_FELL);
            }
            Ok(0)
        }
        Command::Sim(SimCommand::Sweep { grid, out, sequential }) => {
            let g: Grid = read_json(&grid)?;
            let base = base_dir(&grid);
            let scenarios = expand(&g, &base)?;
            let report = sweep(&scenarios, &base, Some(&out), g.parallel && !sequential)?;
            print!("{}", table(&report.runs));
            Ok(0)
        }
        Command::Gait(GaitCommand::Synth { params, model, out }) => {
            let p: SynthParams = read_json(&params)?;
            let m = model_or_default(model.as_deref())?;
            let gait = synthesize_gait(&m, &p).map_err(|e| FormatError::invalid(&params, e))?;
            write_gait(&out, &gait)?;
            Ok(0)
        }
        Command::Gait(GaitCommand::Check { gait, model, bounds }) => {
            let m = model_or_default(model.as_deref())?;
            let g = read_gait(&gait)?;
            if g.model_fingerprint != m.fingerprint() {
                return Err(FormatError::invalid(&gait, "gait was synthesized for a different model").into());
            }
            let b: GaitBounds = match bounds {
                Some(p) => read_json(&p)?,
                None => GaitBounds::default(),
            };
            let report = check_gait(&m, &g, &b);
            print!("{}", to_json_string(&report));
            Ok(if report.all_satisfied() { 0 } else { EXIT_INVALID })
        }
        Command::Report { runs } => {
            let rows: Vec<ReportRow> = load_runs(&runs)?.iter().map(ReportRow::from_summary).collect();
            print!("{}", table(&rows));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
