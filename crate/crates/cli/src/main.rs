use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod experiment;
mod solve;

#[derive(Parser)]
#[command(name = "netmix", version, about = "Minimum-cost linear network mixing for general connections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write its solution document.
    Solve(SolveArgs),
    /// Average optimal costs over random demand realizations.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Centralized,
    PathCfl,
    EdgeCfl,
    Oracle,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Centralized => "centralized",
            Algorithm::PathCfl => "path-cfl",
            Algorithm::EdgeCfl => "edge-cfl",
            Algorithm::Oracle => "oracle",
        }
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Builtin topology (fig3, butterfly, sprint-core) or path to an instance document.
    #[arg(long)]
    pub instance: String,
    #[arg(long, value_enum, default_value = "centralized")]
    pub algorithm: Algorithm,
    /// Solve Problem 2: search demand expansions (full multicast expansion for CFL).
    #[arg(long)]
    pub expand: bool,
    /// Restrict to routing (at most one flow per used edge).
    #[arg(long)]
    pub routing: bool,
    /// Fix every local mixing coefficient to 1 (two-step baseline).
    #[arg(long)]
    pub beta_all_one: bool,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.01)]
    pub b: f64,
    #[arg(long, env = "NETMIX_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    /// CFL runs; the cheapest feasible one is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Prime field size for a random linear code over the solution.
    #[arg(long, requires = "code")]
    pub rlnc_q: Option<u64>,
    #[arg(long, default_value_t = netmix::rlnc::DEFAULT_MAX_TRIES)]
    pub rlnc_tries: usize,
    /// Solution document path (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Engine trace CSV of the kept CFL run.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Per-variable choice CSV of the kept CFL run.
    #[arg(long)]
    pub variable_trace: Option<PathBuf>,
    /// Restart history CSV.
    #[arg(long)]
    pub restart_trace: Option<PathBuf>,
    /// Code document path, used with --rlnc-q.
    #[arg(long)]
    pub code: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Problem 2 (demand expansion).
    Expansion,
    /// Problem 1.
    Mixing,
    /// Minimum-cost routing.
    Routing,
    /// Two-step mixing with every β fixed to 1.
    TwoStep,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Expansion => "expansion",
            Baseline::Mixing => "mixing",
            Baseline::Routing => "routing",
            Baseline::TwoStep => "two-step",
        }
    }
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub instance: String,
    /// Terminals per realization.
    #[arg(long, default_value_t = 2)]
    pub terminals: usize,
    /// Candidate terminal nodes; defaults to every non-source sink.
    #[arg(long, value_delimiter = ',')]
    pub pool: Vec<usize>,
    /// Expected demanded flows per terminal, in [1, 2].
    #[arg(long, default_value_t = 1.5)]
    pub q: f64,
    #[arg(long, default_value_t = 100)]
    pub realizations: usize,
    #[arg(long, env = "NETMIX_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "expansion,mixing,routing")]
    pub algorithms: Vec<Baseline>,
    /// Statistics document path (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-realization cost CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn load_instance(source: &str) -> Result<netmix::NetworkInstance, String> {
    if netmix::io::BUILTINS.contains(&source) {
        return netmix::io::builtin(source).map_err(|e| e.to_string());
    }
    let text = std::fs::read_to_string(source).map_err(|e| format!("cannot read {source}: {e}"))?;
    netmix::io::parse_instance(&text).map_err(|e| format!("{source}: {e}"))
}

pub fn write_text(path: Option<&PathBuf>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(format!("cannot write to stdout: {e}")),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve::run(&args),
        Command::Experiment(args) => experiment::run(&args).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
