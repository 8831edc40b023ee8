use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

#[derive(Debug, Parser)]
#[command(
    name = "soliton-lab",
    version,
    about = "Maps, closed forms and soliton dynamics from travelling-wave reductions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory (default: $SOLITON_LAB_OUT, else the working directory)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// key=value file; flags override its entries
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bifurcation diagram of a one-parameter map
    Bifurcate(commands::BifurcateArgs),
    /// Period-doubling thresholds and their accumulation point
    Cascade(commands::CascadeArgs),
    /// Residual audit of the closed-form catalog
    Audit(commands::AuditArgs),
    /// Spectral evolution of a soliton
    Evolve(commands::EvolveArgs),
    /// Regime report for one equation, or the region table
    Classify(commands::ClassifyArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(soliton_lab::Error),
    Io(std::io::Error),
    AuditFailed(usize),
}

impl From<soliton_lab::Error> for CliError {
    fn from(e: soliton_lab::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
            CliError::AuditFailed(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
            CliError::AuditFailed(n) => write!(f, "{n} corrected closed form(s) failed the audit"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Bifurcate(a) => commands::bifurcate(a),
        Command::Cascade(a) => commands::cascade(a),
        Command::Audit(a) => commands::audit(a),
        Command::Evolve(a) => commands::evolve(a),
        Command::Classify(a) => commands::classify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
