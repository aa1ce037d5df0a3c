//! Command-line front end: each subcommand runs one stage on a session
//! directory, `pipeline` chains them.
//!
//! Exit codes: 0 success, 1 usage error, 2 stage failure.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod pipeline;

pub use pipeline::{DomainEntry, PipelineConfig, MAX_SHORTFALL_ITERATIONS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

/// Environment variable naming the default planner adapter registry.
pub const ADAPTERS_ENV: &str = "PDDLFORGE_ADAPTERS";

#[derive(Debug, Parser)]
#[command(name = "pddlforge", version, about = "PDDL problem, plan and dataset factory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate unique random problems into a session directory.
    GenProblems(GenArgs),
    /// Solve every unplanned problem of a session.
    Plan(PlanArgs),
    /// Build train/valid/test splits from planned sessions.
    Assemble(AssembleArgs),
    /// Check a plan against a domain and problem.
    Validate(ValidateArgs),
    /// Query a completion endpoint with a test split and score the plans.
    Eval(EvalArgs),
    /// Generate, plan, regenerate shortfalls and assemble, from one config.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub domain: PathBuf,
    #[arg(long)]
    pub dpgc: PathBuf,
    #[arg(long)]
    pub count: u64,
    #[arg(long)]
    pub seed: u64,
    /// Session directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub session: PathBuf,
    #[arg(long, default_value = "bfs")]
    pub adapter: String,
    /// Adapter registry file.
    #[arg(long, env = ADAPTERS_ENV)]
    pub adapters: Option<PathBuf>,
    /// Seconds per problem; defaults to the adapter's own timeout.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    /// Planned session; repeat for multi-domain datasets.
    #[arg(long = "session", required = true)]
    pub sessions: Vec<PathBuf>,
    #[arg(long)]
    pub train: usize,
    #[arg(long)]
    pub val: usize,
    #[arg(long)]
    pub test: usize,
    #[arg(long)]
    pub seed: u64,
    /// Defaults to `dataset/` inside the first session.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Text placed before the domain in every instruction.
    #[arg(long)]
    pub instruction_prefix: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub domain: PathBuf,
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// A split file, or a dataset directory (its test.json is used).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Endpoint config file.
    #[arg(long)]
    pub endpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the endpoint config.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Retry once after a transport failure.
    #[arg(long)]
    pub retry: bool,
    /// Query the endpoint again even if earlier inferences are complete.
    #[arg(long)]
    pub rerun: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed; one of the two is required.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// An error in how the tool was invoked rather than in a stage.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

pub fn execute(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::GenProblems(a) => commands::gen_problems(&a),
        Command::Plan(a) => commands::plan(&a),
        Command::Assemble(a) => commands::assemble_cmd(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Pipeline(a) => pipeline::run_pipeline(&a),
    }
}
