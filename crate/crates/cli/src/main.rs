mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit statuses.
const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or parameters.
    Validation(String),
    Runtime(anyhow::Error),
    /// A checked invariant was violated.
    Invariant(String),
}

impl From<grouptest::Error> for Failure {
    fn from(e: grouptest::Error) -> Self {
        use grouptest::Error as E;
        match e {
            E::Domain(_) | E::InvalidConfig(_) | E::Size { .. } | E::CapExceeded(_) | E::Degenerate(_) => {
                Failure::Validation(e.to_string())
            }
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "grouptest", version, about = "Bernoulli nonadaptive group testing: rates, decoders and simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate bounds and test-count thresholds.
    Rates(RatesArgs),
    /// Monte Carlo success curves over a grid of test counts.
    #[command(visible_alias = "sweep")]
    Simulate(SimulateArgs),
    /// The four rate curves against θ, for plotting.
    Figure1(Figure1Args),
    /// Brute-force invariant checks on small random instances.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, env = "GROUPTEST_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Format for standard output.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub k: Option<u64>,
    /// Bernoulli inclusion probability for the typicality bound.
    #[arg(long, conflicts_with = "nu")]
    pub p: Option<f64>,
    /// Design density, `p = 1 - exp(-nu/k)`, for the typicality bound.
    #[arg(long)]
    pub nu: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flat TOML file of settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, conflicts_with = "nu")]
    pub p: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Explicit test counts, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "t_grid")]
    pub tests: Option<Vec<usize>>,
    /// Evenly spaced test counts, `START:STOP:POINTS`.
    #[arg(long)]
    pub t_grid: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Decoder to run; repeat for several.
    #[arg(long = "decoder", value_parser = parse_algorithm)]
    pub decoders: Vec<grouptest::Algorithm>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// SSS search-node budget per trial.
    #[arg(long)]
    pub sss_budget: Option<u64>,
    /// Report where success first reaches 1 - delta.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Also write every trial record as JSON lines.
    #[arg(long)]
    pub records: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct Figure1Args {
    #[arg(long, default_value_t = 0.01)]
    pub theta_min: f64,
    #[arg(long, default_value_t = 0.99)]
    pub theta_max: f64,
    #[arg(long, default_value_t = 99)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 12)]
    pub max_items: usize,
    #[arg(long, default_value_t = 3)]
    pub max_defectives: usize,
    /// Design probabilities to draw from, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5])]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    pub intermediate_samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace COMP with a known-faulty variant.
    #[arg(long, hide = true, value_enum)]
    pub inject_mutant: Option<Mutant>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mutant {
    /// COMP that leaves out items placed in no test.
    CompDropsUntested,
}

fn parse_algorithm(s: &str) -> Result<grouptest::Algorithm, String> {
    s.parse::<grouptest::Algorithm>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Rates(a) => commands::rates(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Figure1(a) => commands::figure1(&a),
        Command::OracleCheck(a) => commands::oracle_check(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violation: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
    }
}
