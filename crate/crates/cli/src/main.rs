mod config;
mod export;
mod run;
mod sweep;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vortex_shape::mesh::hausdorff_distance;
use vortex_shape::Execution;

use config::{ExperimentSpec, Overrides};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Solver(String),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Validation(m) => write!(f, "validation failure: {m}"),
        }
    }
}

/// Shape optimization of an obstacle for maximal vorticity in Stokes channel flow.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct Flags {
    /// Output directory (default: out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Seed of the mesh generator.
    #[arg(long)]
    seed: Option<u64>,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Overrides {
            out: f.out,
            max_iter: f.max_iter,
            tol: f.tol,
            seed: f.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run every entry of the config's [sweep] section.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
        /// Entries run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the built-in oracle checks.
    Validate,
    /// Symmetric Hausdorff distance between two polyline CSV files.
    Hausdorff { a: PathBuf, b: PathBuf },
}

fn read_polyline(path: &PathBuf) -> Result<Vec<[f64; 2]>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    export::read_polyline(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, flags } => {
            let spec = ExperimentSpec::load(&config, &flags.into())?;
            let o = run::run(&spec.name, &spec.run, &spec.out, &spec.compare, spec.vtk_every, Execution::default())?;
            println!(
                "{}: objective {} -> {} ({:+.3}%), volume {:+.3}%, {} iterations, stop {:?}",
                spec.name, o.initial_objective, o.final_objective, o.objective_change, o.volume_change, o.iterations, o.stop
            );
            for (label, d) in &o.distances {
                println!("hausdorff to {label}: {d}");
            }
            println!("artifacts in {}", o.dir.display());
            Ok(())
        }
        Command::Sweep { config, flags, jobs } => {
            let spec = ExperimentSpec::load(&config, &flags.into())?;
            sweep::sweep(&spec, jobs)?;
            println!("artifacts in {}", spec.out.display());
            Ok(())
        }
        Command::Validate => {
            let checks = validate::validate();
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Validation(failed.join(", ")))
            }
        }
        Command::Hausdorff { a, b } => {
            let d = hausdorff_distance(&read_polyline(&a)?, &read_polyline(&b)?)
                .map_err(|e| CliError::Config(e.to_string()))?;
            println!("{d}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
