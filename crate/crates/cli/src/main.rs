use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use floquet_cli::config::{from_table, parse_document, parse_values, ConfigErrors, SweepConfig};
use floquet_cli::{run_experiment, run_sweep, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "floquet", version, about = "Quasi-stationary states of periodically driven open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration (or its [sweep] axis) and write CSVs plus a manifest.
    Solve {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Parallel sweep runs; overrides solver.workers.
        #[arg(long)]
        workers: Option<usize>,
        /// Compare against long-time integration.
        #[arg(long)]
        oracle: bool,
    },
    /// Run the configuration for each value of one parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path, e.g. model.flux.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated list or start:stop:count.
        #[arg(long)]
        values: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        oracle: bool,
    },
    /// Check a configuration and report every problem.
    Validate { config: PathBuf },
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn load(path: &PathBuf) -> Result<toml::Table, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
    Ok(parse_document(&text)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => load(&config).and_then(|doc| Ok(from_table(&doc)?)).map(|cfg| {
            println!("{}: valid {} configuration with {} output(s)", config.display(), cfg.model.kind(), cfg.outputs.len());
            0
        }),
        Command::Solve { config, out, workers, oracle } => solve(&config, &out, None, workers, oracle),
        Command::Sweep { config, param, values, out, workers, oracle } => {
            let axis = match (param, values) {
                (Some(p), Some(v)) => match parse_values(&v) {
                    Ok(values) => Some(Some(SweepConfig { param: p, values })),
                    Err(e) => return fail(&RunError::Config(ConfigErrors(vec![format!("--values: {e}")]))),
                },
                (None, None) => Some(None),
                _ => return fail(&RunError::Config(ConfigErrors(vec!["--param and --values go together".into()]))),
            };
            solve(&config, &out, axis, workers, oracle)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(&e),
    }
}

/// `axis`: `None` for solve, `Some(None)` for a sweep taken from the file.
fn solve(path: &PathBuf, out: &PathBuf, axis: Option<Option<SweepConfig>>, workers: Option<usize>, oracle: bool) -> Result<u8, RunError> {
    let doc = load(path)?;
    let cfg = from_table(&doc)?;
    let opts = RunOptions { oracle };
    let sweep = match axis {
        Some(Some(s)) => Some(s),
        Some(None) => Some(cfg.sweep.clone().ok_or_else(|| ConfigErrors(vec!["sweep: no [sweep] section and no --param/--values".into()]))?),
        None => cfg.sweep.clone(),
    };
    match sweep {
        None => {
            let o = run_experiment(&cfg, out, opts)?;
            println!("wrote {} file(s) to {}", o.tables.len() + 2, out.display());
            Ok(0)
        }
        Some(s) => {
            let workers = workers.unwrap_or(cfg.solver.workers);
            let report = run_sweep(&cfg, &doc, &s, out, workers, opts)?;
            for r in &report.runs {
                if let Err(e) = &r.result {
                    eprintln!("{} = {}: {e}", report.param, r.value);
                }
            }
            println!("{} of {} run(s) succeeded; output in {}", report.runs.len() - report.failures(), report.runs.len(), out.display());
            Ok(if report.failures() > 0 { 2 } else { 0 })
        }
    }
}
