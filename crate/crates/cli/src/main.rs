//! Command line front end.
//!
//! `run` executes the benchmark described by a TOML config, `compare`
//! tabulates traces of the same problem against each other, `phantom` and
//! `matrix` export the synthetic inputs for inspection with other tools.
//!
//! Exit codes: 0 on success (stalled solver runs are results, not errors),
//! 1 for configuration or usage errors, 2 for internal failures.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use boxmg::config::{ConfigError, RunConfig};
use boxmg::driver::{self, DriverError};
use boxmg::phantom::{make_phantom, write_pgm, PhantomKind};
use boxmg::tomography::{build_matrix, ScanGeometry};

/// Overrides the `[output] dir` config field when set; the `--out-dir`
/// flag still wins over the variable.
const OUT_DIR_ENV: &str = "BOXMG_OUT_DIR";

#[derive(Parser)]
#[command(name = "boxmg", version, about = "Two-level box-constrained reconstruction bench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (phantom, mode) cell of a config and write traces.
    Run(RunArgs),
    /// Tabulate when traces of one problem reach relative-objective
    /// thresholds 0.5, 0.1 and 0.01.
    Compare {
        /// Trace CSV files produced by `run`; all must describe the same
        /// problem.
        #[arg(required = true, num_args = 2..)]
        traces: Vec<PathBuf>,
    },
    /// Render a phantom to a binary PGM image.
    Phantom {
        name: String,
        size: usize,
        out: PathBuf,
    },
    /// Export the system matrix of a config's scan geometry in Matrix
    /// Market coordinate format.
    Matrix { config: PathBuf, out: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory (overrides the config and BOXMG_OUT_DIR).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Grid side length (overrides the config).
    #[arg(long)]
    size: Option<usize>,
    /// Scan undersampling fraction (overrides the config).
    #[arg(long)]
    undersampling: Option<f64>,
    /// Comma-separated phantom names (overrides the config).
    #[arg(long, value_delimiter = ',')]
    phantoms: Option<Vec<String>>,
    /// Comma-separated solver modes (overrides the config).
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    /// Outer iteration cap (overrides the config).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Record wall-clock seconds in traces (makes reruns differ).
    #[arg(long)]
    wall_clock: bool,
}

/// Errors split by exit code.
enum CliError {
    Config(String),
    Internal(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DriverError> for CliError {
    fn from(e: DriverError) -> Self {
        match e {
            // Feeding the tool mismatched traces is a usage error.
            DriverError::ProblemMismatch(..) | DriverError::EmptyComparison => {
                CliError::Config(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare { traces } => cmd_compare(&traces),
        Command::Phantom { name, size, out } => cmd_phantom(&name, size, &out),
        Command::Matrix { config, out } => cmd_matrix(&config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(size) = args.size {
        cfg.problem.size = size;
    }
    if let Some(u) = args.undersampling {
        cfg.problem.undersampling = u;
    }
    if let Some(phantoms) = args.phantoms {
        cfg.problem.phantoms = phantoms;
    }
    if let Some(modes) = args.modes {
        cfg.solver.modes = modes;
    }
    if let Some(max_iter) = args.max_iter {
        cfg.solver.max_iter = max_iter;
    }
    if args.wall_clock {
        cfg.solver.wall_clock = true;
    }
    if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
        cfg.output.dir = PathBuf::from(dir);
    }
    if let Some(dir) = args.out_dir {
        cfg.output.dir = dir;
    }
    // Overrides bypass the load-time validation.
    cfg.validate()?;

    let out_dir = cfg.output.dir.clone();
    let summary = driver::run_batch(&cfg, &out_dir)?;
    for cell in &summary.cells {
        println!(
            "{:<20} {:<20} {:<14} f = {:.6e}  evals = {}",
            cell.problem,
            cell.mode.name(),
            cell.status.to_string(),
            cell.final_f,
            cell.fine_grad_evals
        );
    }
    println!("summary: {}", summary.summary_path.display());
    Ok(())
}

fn cmd_compare(paths: &[PathBuf]) -> Result<(), CliError> {
    let traces = paths
        .iter()
        .map(|p| driver::load_trace(p))
        .collect::<Result<Vec<_>, _>>()?;
    let table = driver::compare_traces(&traces)?;
    print!("{}", driver::render_compare(&table));
    Ok(())
}

fn cmd_phantom(name: &str, size: usize, out: &PathBuf) -> Result<(), CliError> {
    let kind: PhantomKind = name
        .parse()
        .map_err(|e: boxmg::phantom::PhantomError| CliError::Config(e.to_string()))?;
    let ph = make_phantom(kind, size).map_err(|e| CliError::Config(e.to_string()))?;
    let file = File::create(out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out.display())))?;
    write_pgm(&ph, BufWriter::new(file))
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_matrix(config: &PathBuf, out: &PathBuf) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let size = cfg.problem.size;
    let geom = ScanGeometry::for_undersampling((size, size), cfg.problem.undersampling)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let matrix = build_matrix(&geom);
    let file = File::create(out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out.display())))?;
    matrix
        .write_matrix_market(BufWriter::new(file))
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", out.display())))?;
    println!(
        "wrote {} ({} rays x {} pixels)",
        out.display(),
        matrix.nrows(),
        matrix.ncols()
    );
    Ok(())
}

