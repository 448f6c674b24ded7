use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use irsradar_cli::experiment;
use irsradar_cli::spec::{load_spec, ExperimentSpec, SpecError, SweepSpec};
use irsradar_cli::validate::{run_suite, SuiteOptions};
use irsradar_cli::{write_csv, ResultRow};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PROPERTY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "irsradar",
    version,
    about = "IRS-aided MIMO radar waveform and phase-shift design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a spec file and write CSV rows.
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV; defaults to the spec's output_path, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the per-iteration bound trace for a spec (forces trace mode).
    Trace {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized invariant suite.
    Validate {
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = SuiteOptions::default().seed)]
        seed: u64,
    },
    /// Print a bundled spec as JSON.
    PrintSpec {
        #[arg(long, value_enum)]
        template: Template,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Template {
    Fig1,
    Fig1Trace,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn emit(rows: &[ResultRow], out: Option<&Path>) -> Result<(), Failure> {
    let runtime = |e: &dyn std::fmt::Display| Failure::Runtime(e.to_string());
    match out {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| runtime(&format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_csv(rows, &mut w).map_err(|e| runtime(&e))?;
            w.flush().map_err(|e| runtime(&e))
        }
        None => write_csv(rows, std::io::stdout().lock()).map_err(|e| runtime(&e)),
    }
}

fn run_spec(spec: ExperimentSpec, out: Option<PathBuf>) -> Result<(), Failure> {
    let rows = experiment::run(&spec).map_err(|e| Failure::Runtime(e.to_string()))?;
    let target = out.or(spec.output_path.clone());
    emit(&rows, target.as_deref())
}

fn dispatch(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Run { spec, out } => run_spec(load_spec(&spec)?, out)?,
        Command::Trace { spec, out } => {
            let mut spec = load_spec(&spec)?;
            spec.sweep = SweepSpec::Trace;
            run_spec(spec, out)?
        }
        Command::Validate { quick, seed } => {
            let report = run_suite(&SuiteOptions {
                quick,
                seed,
                d_mutation: None,
            });
            for p in &report.properties {
                println!("{p}");
            }
            if !report.all_passed() {
                return Ok(ExitCode::from(EXIT_PROPERTY));
            }
        }
        Command::PrintSpec { template } => {
            let spec = match template {
                Template::Fig1 => ExperimentSpec::fig1(),
                Template::Fig1Trace => ExperimentSpec::fig1_trace(),
            };
            println!("{}", spec.to_json());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
