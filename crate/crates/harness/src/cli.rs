//! Command-line entry point, kept free of process globals so tests can
//! drive it with in-memory streams.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fogmarket_core::market::run_market;
use fogmarket_core::model::validate_scenario;
use fogmarket_core::Scenario;

use crate::error::{HarnessError, Result};
use crate::generator::{generate_scenario, GeneratorParams};
use crate::sweep::{parse_grid, run_sweep, SweepSpec, SweepVar};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fogmarket", version, about = "Fog computing market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one market and print the outcome as JSON.
    Run {
        /// Scenario file; when absent a scenario is generated.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
        /// Write the outcome here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one generator parameter and tabulate tier utilities.
    Sweep {
        #[arg(long = "var", value_parser = clap::value_parser!(SweepVarArg))]
        var: SweepVarArg,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 30)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Check a scenario file against the model invariants.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Write a generated scenario as JSON.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy)]
struct SweepVarArg(SweepVar);

impl std::str::FromStr for SweepVarArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.parse().map(SweepVarArg)
    }
}

/// Overrides on top of the default generator parameters.
#[derive(Debug, Clone, Default, Args)]
struct GenArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_dss: Option<usize>,
    #[arg(long)]
    n_dso: Option<usize>,
    #[arg(long)]
    n_fn: Option<usize>,
    #[arg(long)]
    district_diameter: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    t_th: Option<f64>,
    #[arg(long)]
    lambda_mean: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    cloud_distance: Option<f64>,
    #[arg(long)]
    cloud_unit_cost: Option<f64>,
}

impl GenArgs {
    fn params(&self) -> GeneratorParams {
        let mut p = GeneratorParams::default();
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { p.$f = v; })* };
        }
        set!(
            seed,
            n_dss,
            n_dso,
            n_fn,
            district_diameter,
            mu,
            t_th,
            lambda_mean,
            theta,
            kappa,
            cloud_distance,
            cloud_unit_cost
        );
        p
    }
}

/// Runs the CLI with `args` (including the program name) and returns the
/// process exit code: 0 on success, 1 on invalid input data or a failed
/// run, 2 on a usage error.
pub fn cli_main<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_FAILURE
        }
    }
}

enum Failure {
    Usage(String),
    Run(HarnessError),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> std::result::Result<i32, Failure> {
    match command {
        Command::Run { scenario, gen, out } => {
            let scenario = match scenario {
                Some(path) => read_scenario(&path)?,
                None => generate_scenario(&gen.params())?,
            };
            let outcome = run_market(&scenario).map_err(HarnessError::from)?;
            emit(out.as_deref(), stdout, |w| {
                serde_json::to_writer_pretty(&mut *w, &outcome)?;
                writeln!(w)?;
                Ok(())
            })?;
            Ok(EXIT_OK)
        }
        Command::Sweep { var, grid, reps, out, format, workers, gen } => {
            let grid = parse_grid(&grid).map_err(Failure::Usage)?;
            let spec = SweepSpec { variable: var.0, grid, replications: reps, base: gen.params() };
            if let Err(e) = spec.validate() {
                return Err(Failure::Usage(e.to_string()));
            }
            let report = run_sweep(&spec, workers)?;
            emit(out.as_deref(), stdout, |w| match format {
                Format::Csv => report.write_csv(w),
                Format::Json => report.write_json(w),
            })?;
            for e in &report.errors {
                writeln!(
                    stderr,
                    "{}={} replicate {} (seed {}): {}",
                    spec.variable.name(),
                    e.value,
                    e.replicate,
                    e.seed,
                    e.message
                )?;
            }
            Ok(if report.errors.is_empty() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Validate { scenario } => {
            let s = read_scenario_unchecked(&scenario)?;
            let violations = validate_scenario(&s);
            if violations.is_empty() {
                writeln!(stdout, "ok: {} DSSs, {} DSOs, {} FNs", s.dsss.len(), s.dsos.len(), s.fns.len())?;
                Ok(EXIT_OK)
            } else {
                for v in &violations {
                    writeln!(stderr, "violation: {v}")?;
                }
                Ok(EXIT_FAILURE)
            }
        }
        Command::Generate { gen, out } => {
            let scenario = generate_scenario(&gen.params())?;
            emit(out.as_deref(), stdout, |w| {
                serde_json::to_writer_pretty(&mut *w, &scenario)?;
                writeln!(w)?;
                Ok(())
            })?;
            Ok(EXIT_OK)
        }
    }
}

fn read_scenario_unchecked(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    let s = read_scenario_unchecked(path)?;
    s.validate()?;
    Ok(s)
}

fn emit(path: Option<&Path>, stdout: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            body(&mut w)?;
            w.flush()?;
        }
        None => body(stdout)?,
    }
    Ok(())
}
