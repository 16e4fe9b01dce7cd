use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use schrodingerizer::runner::{
    estimate_csv, estimate_query, load_config, run_experiment, validate, write_atomic, RunError,
};

#[derive(Parser)]
#[command(name = "schrodingerizer", version, about = "Schrodingerised evolution of linear PDEs and ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write snapshot, diagnostics and manifest files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a gate or query count.
    Estimate {
        #[arg(long)]
        query: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config against the schema and model constraints.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn threads_from_env() -> Result<(), RunError> {
    let Ok(v) = std::env::var("SCHRO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| RunError::Config(format!("SCHRO_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))
}

fn execute(cli: Cli) -> Result<(), RunError> {
    threads_from_env()?;
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let report = run_experiment(&cfg, out.as_deref())?;
            for f in &report.files {
                println!("{}", f.display());
            }
        }
        Command::Estimate { query, out } => {
            let e = estimate_query(&query)?;
            let csv = estimate_csv(&e);
            let line = format!("{:?}: {} = {:.6}", e.method, e.formula, e.leading);
            match out {
                Some(path) => {
                    write_atomic(&path, csv.as_bytes())?;
                    println!("{line}");
                }
                None => {
                    print!("{csv}");
                    eprintln!("{line}");
                }
            }
            if let Some(p) = e.polylog {
                eprintln!("polylog factor log^3.5(tau/eps)/loglog(tau/eps) = {p:.6}");
            }
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            validate(&cfg)?;
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
