//! `emsim`: headless entry points.
//!
//! Exit codes: 0 success, 1 internal or storage error, 2 usage, 3 provider
//! failure, 4 validation failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emsim_workflow::RunMode;

#[derive(Parser, Debug)]
#[command(name = "emsim", version, about = "Prompt-driven 2D eddy-current simulation")]
pub struct Cli {
    /// JSON configuration file (provider, model defaults, mesh overrides).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for artifacts and reports.
    #[arg(long, global = true, default_value = "emsim-out")]
    pub out: PathBuf,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the full workflow for one prompt.
    Run(RunArgs),
    /// Mesh and solve a layout file without the language model.
    Solve(SolveArgs),
    /// Parse, validate and lint a post-processing file.
    Check(CheckArgs),
    /// Read prompts from stdin and run each in one session.
    Repl(ProviderArgs),
    /// Start the HTTP API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProviderChoice {
    Stub,
    Http,
}

#[derive(Args, Debug, Clone)]
pub struct ProviderArgs {
    /// Completion provider; defaults to the stub unless an API key and an endpoint are configured.
    #[arg(long, value_enum)]
    pub provider: Option<ProviderChoice>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Use the post-processing prompt without worked examples.
    #[arg(long)]
    pub no_dsl_examples: bool,
    #[arg(long, default_value = "layout_only")]
    pub mode: RunMode,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub prompt: String,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Layout JSON: `{"centers": [[x, y], ...], "radius_m": .., "boundary_margin_m": ..}`.
    pub layout: PathBuf,
    /// Frequency in Hz; 0 gives the DC solution.
    #[arg(long)]
    pub freq: Option<f64>,
    /// Current amplitude in A, the same in every conductor.
    #[arg(long)]
    pub current: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub dsl: PathBuf,
    /// Take the conductor regions from a layout file.
    #[arg(long, required_unless_present = "conductors", conflicts_with = "conductors")]
    pub layout: Option<PathBuf>,
    /// Number of conductor regions.
    #[arg(long)]
    pub conductors: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(commands::dispatch(cli))
}
