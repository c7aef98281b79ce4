//! `gbl`: lower bounds, configuration sampling and validation, and batch
//! simulations for graph-structured Bernoulli bandits.
//!
//! Exit codes: 0 on success, 2 for invalid input (bad flags, bad or
//! inconsistent configuration), 3 when a sampler, solver or run fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gbl_core::policy::PolicyKind;
use gbl_core::sim::Scenario;

#[derive(Debug, Parser)]
#[command(name = "gbl", version, about = "Graph-structured Bernoulli bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Structured and agnostic lower-bound constants with per-arm allocations.
    LowerBound(LowerBoundArgs),
    /// Batch simulation; writes mean pseudo-regret curves as CSV.
    Run(RunArgs),
    /// Expected ratio of structured to agnostic constants on uniform weights.
    RatioCurve(RatioCurveArgs),
    /// Samples a configuration and writes it as JSON.
    Sample(SampleArgs),
    /// Checks weights, structure membership and non-peculiarity.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Configuration file (JSON); the bundled 5-arm, 10-user configuration
    /// when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LowerBoundArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Log-frequencies: one value for every user, or a comma-separated list
    /// with one value per user.
    #[arg(long, default_value = "1")]
    beta: String,
    /// Allocation CSV (arm,user,n_opt,objective); printed after the summary
    /// when omitted.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Draw a fresh weight matrix and configuration for every run instead of
    /// using a fixed configuration.
    #[arg(long, conflicts_with = "config")]
    random: bool,
    /// Arms of random configurations.
    #[arg(long, default_value_t = 5, requires = "random")]
    arms: usize,
    /// Users of random configurations.
    #[arg(long, default_value_t = 10, requires = "random")]
    users: usize,
    /// Uniform off-diagonal weight of random configurations [default: a
    /// random metric per run].
    #[arg(long, requires = "random")]
    alpha: Option<f64>,
    /// Comma-separated policies: imed, imed-gs, imed-gs-star, imed-gs2,
    /// imed-gs-star2.
    #[arg(long, value_delimiter = ',', default_value = "imed,imed-gs,imed-gs-star")]
    policies: Vec<PolicyKind>,
    /// controlled (policy picks the user) or uncontrolled (round-robin users).
    #[arg(long, default_value = "controlled")]
    scenario: Scenario,
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Master seed; run `i` uses `seed XOR i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ratio of the geometric checkpoint grid; 1 records every step.
    #[arg(long, default_value_t = 1.1)]
    thinning: f64,
    /// Check the per-step policy guarantees and abort on a violation.
    #[arg(long)]
    check_invariants: bool,
    /// Aggregate CSV (t,policy,mean_regret,std_regret,n_runs); stdout when
    /// omitted.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Per-run trace CSV (t,policy,run,pseudo_regret,min_Nb,pareto_max_over_arms).
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long, env = "GBL_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct RatioCurveArgs {
    /// Comma-separated alpha grid in [0, 1].
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"
    )]
    alphas: Vec<f64>,
    /// Configurations sampled per alpha.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    arms: usize,
    #[arg(long, default_value_t = 10)]
    users: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV (alpha,mean_ratio,std_error,n_samples); stdout when omitted.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 5)]
    arms: usize,
    #[arg(long, default_value_t = 10)]
    users: usize,
    /// Uniform off-diagonal weight [default: a random metric].
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::LowerBound(args) => commands::lower_bound(args),
        Command::Run(args) => commands::run(args),
        Command::RatioCurve(args) => commands::ratio_curve(args),
        Command::Sample(args) => commands::sample(args),
        Command::Validate(args) => commands::validate(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gbl: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
