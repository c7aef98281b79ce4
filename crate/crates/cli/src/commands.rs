use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use serde_json::json;

use gbl_core::graph::{check_membership, is_non_peculiar, validate_weights};
use gbl_core::lp::{self, agnostic_constant, c_star, solve_all};
use gbl_core::policy::PolicyKind;
use gbl_core::sim::{
    batch, write_aggregate_csv, write_trace_csv, AggregateRow, BatchSpec, ConfigSource,
    RunOptions, Scenario, WeightSource,
};
use gbl_core::{fixed_config, BanditConfig};

use crate::{LowerBoundArgs, RatioCurveArgs, RunArgs, SampleArgs, ValidateArgs};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

fn failed(message: impl Into<String>) -> CliError {
    CliError {
        code: 3,
        message: message.into(),
    }
}

type CmdResult = Result<ExitCode, CliError>;

fn load_config(path: Option<&Path>) -> Result<BanditConfig, CliError> {
    match path {
        None => Ok(fixed_config()),
        Some(p) => {
            BanditConfig::load(p).map_err(|e| invalid(format!("{}: {e}", p.display())))
        }
    }
}

/// Metric and closure-membership violations, one message per line.
fn structural_problems(config: &BanditConfig) -> Vec<String> {
    let mut out: Vec<String> = validate_weights(config.weights())
        .iter()
        .map(|v| v.to_string())
        .collect();
    out.extend(
        check_membership(config, false)
            .violations
            .iter()
            .map(|v| v.to_string()),
    );
    out
}

fn require_valid(config: &BanditConfig) -> Result<(), CliError> {
    let problems = structural_problems(config);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(invalid(format!(
            "invalid configuration:\n  {}",
            problems.join("\n  ")
        )))
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) => File::create(p)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| failed(format!("{}: {e}", p.display()))),
    }
}

fn io_failure(e: impl std::fmt::Display) -> CliError {
    failed(format!("write failed: {e}"))
}

fn parse_beta(spec: &str, n_users: usize) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| invalid(format!("--beta: {e}")))?;
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("--beta: values must be finite and nonnegative"));
    }
    match values.len() {
        1 => Ok(vec![values[0]; n_users]),
        n if n == n_users => Ok(values),
        n => Err(invalid(format!(
            "--beta: got {n} values for {n_users} users"
        ))),
    }
}

pub fn lower_bound(args: LowerBoundArgs) -> CmdResult {
    let config = load_config(args.config.config.as_deref())?;
    require_valid(&config)?;
    let beta = parse_beta(&args.beta, config.n_users())?;
    let solutions = solve_all(&config, &beta).map_err(|e| failed(e.to_string()))?;
    let structured = solutions.iter().map(|s| s.objective).sum::<f64>();
    let agnostic = agnostic_constant(&config, &beta).map_err(|e| failed(e.to_string()))?;
    let ratio = if agnostic > 0.0 {
        structured / agnostic
    } else {
        1.0
    };

    let mut stdout = io::stdout().lock();
    writeln!(stdout, "c_star_structured: {structured}").map_err(io_failure)?;
    writeln!(stdout, "c_star_agnostic: {agnostic}").map_err(io_failure)?;
    writeln!(stdout, "ratio: {ratio}").map_err(io_failure)?;
    drop(stdout);

    let mut out = match args.output.as_deref() {
        Some(p) => open_output(Some(p))?,
        None => {
            println!();
            open_output(None)?
        }
    };
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["arm", "user", "n_opt", "objective"])
            .map_err(io_failure)?;
        for s in &solutions {
            for (user, n) in s.users.iter().zip(&s.allocation) {
                w.write_record([
                    s.arm.to_string(),
                    user.to_string(),
                    n.to_string(),
                    s.objective.to_string(),
                ])
                .map_err(io_failure)?;
            }
        }
        w.flush().map_err(io_failure)?;
    }
    out.flush().map_err(io_failure)?;
    Ok(ExitCode::SUCCESS)
}

fn check_scenario(policy: PolicyKind, scenario: Scenario) -> Result<(), CliError> {
    let ok = match scenario {
        Scenario::Controlled => !matches!(policy, PolicyKind::ImedGs2 | PolicyKind::ImedGsStar2),
        Scenario::Uncontrolled => !policy.chooses_user(),
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!(
            "policy {policy} does not run in the {scenario} scenario"
        )))
    }
}

pub fn run(args: RunArgs) -> CmdResult {
    if args.policies.is_empty() {
        return Err(invalid("--policies: at least one policy"));
    }
    for &p in &args.policies {
        check_scenario(p, args.scenario)?;
    }
    if args.horizon == 0 || args.runs == 0 {
        return Err(invalid("--horizon and --runs must be positive"));
    }
    if !(args.thinning.is_finite() && args.thinning >= 1.0) {
        return Err(invalid("--thinning must be at least 1"));
    }
    let fixed = if args.random {
        if args.arms == 0 || args.users == 0 {
            return Err(invalid("--arms and --users must be positive"));
        }
        if let Some(alpha) = args.alpha {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(invalid("--alpha must lie in [0, 1]"));
            }
        }
        None
    } else {
        let config = load_config(args.config.config.as_deref())?;
        require_valid(&config)?;
        Some(config)
    };
    let source = match &fixed {
        Some(config) => ConfigSource::Fixed(config.clone()),
        None => ConfigSource::Random {
            n_arms: args.arms,
            n_users: args.users,
            weights: args
                .alpha
                .map_or(WeightSource::Random, WeightSource::Uniform),
        },
    };
    let spec = BatchSpec {
        source,
        policies: args.policies.clone(),
        users: args.scenario.users(),
        horizon: args.horizon,
        n_runs: args.runs,
        master_seed: args.seed,
        options: RunOptions {
            check_invariants: args.check_invariants,
            thinning: args.thinning,
            extra_checkpoints: Vec::new(),
        },
        threads: args.threads,
    };
    let result = batch(&spec).map_err(|e| failed(e.to_string()))?;
    let mut rows = result.aggregate();
    if let Some(config) = &fixed {
        let ones = vec![1.0; config.n_users()];
        let structured = c_star(config, &ones).map_err(|e| failed(e.to_string()))?;
        let agnostic = agnostic_constant(config, &ones).map_err(|e| failed(e.to_string()))?;
        for (name, constant) in [("LB_struct", structured), ("LB_agnostic", agnostic)] {
            rows.extend(result.checkpoints.iter().map(|&t| AggregateRow {
                t,
                policy: name.to_string(),
                mean: constant * (t as f64).ln(),
                std: 0.0,
                n_runs: 0,
            }));
        }
    }
    let out = open_output(args.output.as_deref())?;
    write_aggregate_csv(out, &rows).map_err(io_failure)?;
    if let Some(path) = args.trace.as_deref() {
        write_trace_csv(open_output(Some(path))?, &result).map_err(io_failure)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn ratio_curve(args: RatioCurveArgs) -> CmdResult {
    if args.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(invalid("--alphas: every alpha must lie in [0, 1]"));
    }
    if args.samples == 0 || args.arms == 0 || args.users == 0 {
        return Err(invalid("--samples, --arms and --users must be positive"));
    }
    let curve = lp::ratio_curve(&args.alphas, args.arms, args.users, args.samples, args.seed)
        .map_err(|e| failed(e.to_string()))?;
    let mut w = csv::Writer::from_writer(open_output(args.output.as_deref())?);
    w.write_record(["alpha", "mean_ratio", "std_error", "n_samples"])
        .map_err(io_failure)?;
    for p in &curve {
        w.write_record([
            p.alpha.to_string(),
            p.mean.to_string(),
            p.std_error.to_string(),
            p.n_samples.to_string(),
        ])
        .map_err(io_failure)?;
    }
    w.flush().map_err(io_failure)?;
    Ok(ExitCode::SUCCESS)
}

pub fn sample(args: SampleArgs) -> CmdResult {
    if args.arms == 0 || args.users == 0 {
        return Err(invalid("--arms and --users must be positive"));
    }
    if let Some(alpha) = args.alpha {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid("--alpha must lie in [0, 1]"));
        }
    }
    let source = ConfigSource::Random {
        n_arms: args.arms,
        n_users: args.users,
        weights: args
            .alpha
            .map_or(WeightSource::Random, WeightSource::Uniform),
    };
    let config = source
        .config_for(args.seed)
        .map_err(|e| failed(e.to_string()))?;
    let constant = c_star(&config, &vec![1.0; config.n_users()])
        .map_err(|e| failed(e.to_string()))?;
    match args.output.as_deref() {
        Some(path) => {
            std::fs::write(path, config.to_json())
                .map_err(|e| failed(format!("{}: {e}", path.display())))?;
            println!("c_star_structured: {constant}");
        }
        None => {
            print!("{}", config.to_json());
            eprintln!("c_star_structured: {constant}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn validate(args: ValidateArgs) -> CmdResult {
    let config = load_config(args.config.config.as_deref())?;
    let metric: Vec<String> = validate_weights(config.weights())
        .iter()
        .map(|v| v.to_string())
        .collect();
    let membership: Vec<String> = check_membership(&config, false)
        .violations
        .iter()
        .map(|v| v.to_string())
        .collect();
    let boundary: Vec<String> = check_membership(&config, true)
        .violations
        .iter()
        .skip(membership.len())
        .map(|v| v.to_string())
        .collect();
    let peculiarity = is_non_peculiar(&config);
    let valid = metric.is_empty() && membership.is_empty() && peculiarity.is_non_peculiar();
    let report = json!({
        "valid": valid,
        "n_arms": config.n_arms(),
        "n_users": config.n_users(),
        "metric_violations": metric,
        "member": membership.is_empty(),
        "membership_violations": membership,
        "strict_member": boundary.is_empty(),
        "boundary_couples": boundary,
        "non_peculiar": peculiarity.is_non_peculiar(),
        "tied_users": peculiarity.tied_users,
        "ambiguous_arms": peculiarity.ambiguous_arms,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(if valid {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
