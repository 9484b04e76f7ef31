mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, Command, FileConfig};

/// Entropy-stable DGD discretizations of advection and the Euler equations.
///
/// Threads follow RAYON_NUM_THREADS; results do not depend on the thread count.
#[derive(Debug, Parser)]
#[command(name = "dgd", version)]
struct Cli {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Check the element and global SBP properties and write summary.json.
    VerifyOperators(CommonArgs),
    /// Integrate a problem in time; writes entropy_history.csv and solution.csv.
    Run(CommonArgs),
    /// Eigenvalues of the linearized Euler operator; writes eigenvalues.csv.
    Spectra(CommonArgs),
    /// Error and observed order on a mesh sequence; writes errors.csv.
    Convergence(CommonArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Sub::VerifyOperators(a) => (Command::VerifyOperators, a),
        Sub::Run(a) => (Command::Run, a),
        Sub::Spectra(a) => (Command::Spectra, a),
        Sub::Convergence(a) => (Command::Convergence, a),
    };
    let file = match &cli.config {
        Some(path) => match config::read_file(path) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => FileConfig::default(),
    };
    let cfg = match config::resolve(command, args, &file) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match commands::execute(&cfg) {
        Ok(checks) => {
            for c in &checks.0 {
                println!("{} {}: {:e} {} {:e}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.value, c.relation, c.bound);
            }
            println!("results written to {}", cfg.out.display());
            if checks.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
