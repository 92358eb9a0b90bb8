use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lagns::{compare, suites, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lagns", version, about = "Lagrangian solver for inhomogeneous incompressible Navier-Stokes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML or JSON config (or a previous manifest).
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diff the norm logs of two run directories.
    Compare { a: PathBuf, b: PathBuf },
    /// Run a named suite: smoke, sigma-sweep or stability.
    Suite {
        name: String,
        #[arg(long, default_value = "lagns-suite")]
        out: PathBuf,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

/// Sizes the global pool from `LAGNS_THREADS`; returns the thread count used.
fn init_threads() -> Result<usize, CliError> {
    let threads = match std::env::var("LAGNS_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::config("LAGNS_THREADS", format!("expected a positive integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::io("thread pool", e))?;
    Ok(rayon::current_num_threads())
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let threads = init_threads()?;
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            let (code, error) = lagns::run(&cfg, &dir, threads)?;
            match error {
                Some(e) => eprintln!("{}", e.to_json()),
                None => println!("{}", dir.display()),
            }
            Ok(code)
        }
        Command::Compare { a, b } => {
            let c = compare::compare(&a, &b)?;
            println!("{}", serde_json::to_string_pretty(&c).map_err(|e| CliError::io("stdout", e))?);
            Ok(0)
        }
        Command::Suite { name, out, jobs } => {
            let s = suites::run_suite(&name, &out, jobs, threads)?;
            for m in &s.members {
                println!("{}\t{}\t{}", m.exit_code, m.name, m.dir.display());
            }
            for c in &s.comparisons {
                if let Some(r) = c.stability_ratio {
                    println!("stability {} vs {}: {r:.4e}", c.a, c.b);
                }
            }
            Ok(s.exit_code)
        }
    }
}

fn main() -> ExitCode {
    let code = dispatch(Cli::parse()).unwrap_or_else(|e| {
        eprintln!("{}", e.to_json());
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
