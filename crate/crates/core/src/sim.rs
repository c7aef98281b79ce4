//! Bernoulli environment, single runs and seeded batches.

use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{
    derive, sample_config_with, sample_weights_with, BanditConfig, DerivedQuantities,
    SampleError, WeightMatrix,
};
use crate::kl::kl_raw;
use crate::policy::{
    check_counters, check_step, decide, EmpiricalView, Phase, PolicyError, PolicyKind,
    PolicyState,
};
use crate::rng::{tags, CounterRng};

/// Default ratio of the geometric checkpoint grid.
pub const DEFAULT_THINNING: f64 = 1.1;

/// Bernoulli rewards driven by a counter-based stream: the reward at step
/// `t` is `1` iff the `t`-th uniform draw falls below the pulled mean.
#[derive(Debug, Clone)]
pub struct Environment<'c> {
    config: &'c BanditConfig,
    rng: CounterRng,
    step: u64,
}

impl<'c> Environment<'c> {
    pub fn new(config: &'c BanditConfig, seed: u64) -> Self {
        Environment {
            config,
            rng: CounterRng::new(seed).fork(tags::ENVIRONMENT),
            step: 0,
        }
    }

    pub fn pull(&mut self, arm: usize, user: usize) -> f64 {
        let u = self.rng.uniform_at(self.step);
        self.step += 1;
        if u < self.config.mean(arm, user) {
            1.0
        } else {
            0.0
        }
    }
}

/// Where the user of each step comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum UserSequence {
    /// The policy picks the user. Strategies that need an imposed user get
    /// round-robin users instead.
    PolicyChosen,
    RoundRobin,
    /// Cycled list of user indices.
    FixedList(Vec<usize>),
}

impl UserSequence {
    /// Imposed user at 0-based step `t`, if any.
    pub fn imposed(&self, t: u64, n_users: usize) -> Option<usize> {
        match self {
            UserSequence::PolicyChosen => None,
            UserSequence::RoundRobin => Some((t % n_users as u64) as usize),
            UserSequence::FixedList(list) => Some(list[(t % list.len() as u64) as usize]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Controlled,
    /// Round-robin users.
    Uncontrolled,
}

impl Scenario {
    pub fn users(self) -> UserSequence {
        match self {
            Scenario::Controlled => UserSequence::PolicyChosen,
            Scenario::Uncontrolled => UserSequence::RoundRobin,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Controlled => "controlled",
            Scenario::Uncontrolled => "uncontrolled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scenario `{0}` (expected controlled or uncontrolled)")]
pub struct UnknownScenario(pub String);

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "controlled" => Ok(Scenario::Controlled),
            "uncontrolled" => Ok(Scenario::Uncontrolled),
            other => Err(UnknownScenario(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("policy {policy} cannot run with an imposed user sequence")]
    Incompatible { policy: PolicyKind },
    #[error("user {user} out of range for {n_users} users")]
    UserOutOfRange { user: usize, n_users: usize },
    #[error("invariant violated at step {step}: {detail}")]
    InvariantViolation { step: u64, detail: String },
    #[error("step {step}: {source}")]
    Policy {
        step: u64,
        #[source]
        source: PolicyError,
    },
    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<SimError>,
    },
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Recorded time steps: `round(ratio^k)` for `k = 0, 1, ...`, deduplicated,
/// plus the horizon. A ratio of at most 1 keeps every step.
pub fn checkpoints(horizon: u64, ratio: f64) -> Vec<u64> {
    if horizon == 0 {
        return Vec::new();
    }
    if ratio.is_nan() || ratio <= 1.0 {
        return (1..=horizon).collect();
    }
    let mut out = Vec::new();
    let mut x = 1.0f64;
    loop {
        let t = x.round() as u64;
        if t >= horizon {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        x *= ratio;
    }
    out.push(horizon);
    out
}

impl RunOptions {
    /// Recorded steps for `horizon`: the geometric grid plus the extra
    /// checkpoints that fall within the horizon.
    pub fn checkpoints(&self, horizon: u64) -> Vec<u64> {
        let mut marks = checkpoints(horizon, self.thinning);
        marks.extend(
            self.extra_checkpoints
                .iter()
                .filter(|&&t| t >= 1 && t <= horizon),
        );
        marks.sort_unstable();
        marks.dedup();
        marks
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Check the per-step policy guarantees (slow-ish; on by default in
    /// debug builds).
    pub check_invariants: bool,
    /// Ratio of the geometric checkpoint grid.
    pub thinning: f64,
    /// Additional recorded steps, merged into the grid.
    pub extra_checkpoints: Vec<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            check_invariants: cfg!(debug_assertions),
            thinning: DEFAULT_THINNING,
            extra_checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub t: u64,
    pub pseudo_regret: f64,
    /// Realized cumulative reward.
    pub reward: f64,
    pub min_user_count: u64,
    /// Maximum over arms of the Pareto statistic, `None` when undefined.
    pub pareto_max: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub policy: PolicyKind,
    pub horizon: u64,
    pub points: Vec<TracePoint>,
    phase_counts: [u64; Phase::ALL.len()],
    pub final_state: PolicyState,
}

impl RunTrace {
    pub fn phase_count(&self, phase: Phase) -> u64 {
        self.phase_counts[phase as usize]
    }

    pub fn final_point(&self) -> &TracePoint {
        self.points.last().expect("non-empty trace")
    }

    pub fn point_at(&self, t: u64) -> Option<&TracePoint> {
        self.points
            .binary_search_by_key(&t, |p| p.t)
            .ok()
            .map(|i| &self.points[i])
    }
}

/// Pseudo-regret `sum Delta[a][b] N[a][b]`.
pub fn pseudo_regret(state: &PolicyState, derived: &DerivedQuantities) -> f64 {
    let nb = state.n_users;
    state
        .counts
        .iter()
        .enumerate()
        .map(|(i, &n)| derived.gap(i / nb, i % nb) * n as f64)
        .sum()
}

/// Per-arm Pareto statistic
/// `min_b sum_{b' in B[a][b]} kl(mu[a][b'] | mu*_b - w[b][b']) N[a][b'] / ln N_b`
/// over the sub-optimal couples `(a, b)`; `None` for arms that are optimal
/// for every user.
pub fn pareto_statistic(
    state: &PolicyState,
    config: &BanditConfig,
    derived: &DerivedQuantities,
) -> Vec<Option<f64>> {
    let user_counts: Vec<u64> = (0..state.n_users).map(|b| state.user_count(b)).collect();
    (0..config.n_arms())
        .map(|a| {
            derived
                .suboptimal_users(a)
                .into_iter()
                .map(|b| {
                    let cost: f64 = derived
                        .info_set(a, b)
                        .iter()
                        .map(|&b2| {
                            let n = state.count(a, b2);
                            if n == 0 {
                                0.0
                            } else {
                                let target = derived.mu_star[b] - config.weights().get(b, b2);
                                kl_raw(config.mean(a, b2), target) * n as f64
                            }
                        })
                        .sum();
                    let log_nb = (user_counts[b] as f64).ln();
                    if cost == 0.0 {
                        0.0
                    } else {
                        cost / log_nb
                    }
                })
                .reduce(f64::min)
        })
        .collect()
}

/// `ln N_b / ln t` for every user.
pub fn log_frequency_estimate(state: &PolicyState) -> Vec<f64> {
    let log_t = (state.t as f64).ln();
    (0..state.n_users)
        .map(|b| (state.user_count(b) as f64).ln() / log_t)
        .collect()
}

fn state_dump(state: &PolicyState) -> String {
    let rows: Vec<String> = state
        .counts
        .chunks(state.n_users)
        .map(|row| format!("{row:?}"))
        .collect();
    format!(
        "t = {}, counts = [{}], c = {:?}, c+ = {:?}",
        state.t,
        rows.join(", "),
        state.counters,
        state.counters_plus
    )
}

/// Runs `policy` for `horizon` steps.
pub fn run(
    config: &BanditConfig,
    policy: PolicyKind,
    users: &UserSequence,
    horizon: u64,
    seed: u64,
    options: &RunOptions,
) -> Result<RunTrace, SimError> {
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    if policy.chooses_user() && *users != UserSequence::PolicyChosen {
        return Err(SimError::Incompatible { policy });
    }
    let (na, nb) = (config.n_arms(), config.n_users());
    if let UserSequence::FixedList(list) = users {
        if let Some(&user) = list.iter().find(|&&u| u >= nb) {
            return Err(SimError::UserOutOfRange { user, n_users: nb });
        }
        if list.is_empty() {
            return Err(SimError::ZeroHorizon);
        }
    }
    let derived = derive(config);
    let marks = options.checkpoints(horizon);
    let mut next_mark = 0;
    let mut env = Environment::new(config, seed);
    let mut state = PolicyState::new(na, nb);
    let mut view = EmpiricalView::new(&state, config.weights());
    let mut points = Vec::with_capacity(marks.len());
    let mut phase_counts = [0u64; Phase::ALL.len()];
    let mut reward = 0.0;

    for step in 0..horizon {
        let incoming = users
            .imposed(step, nb)
            .or_else(|| (!policy.chooses_user()).then(|| (step % nb as u64) as usize));
        let decision = decide(policy, &view, &mut state, incoming)
            .map_err(|source| SimError::Policy { step, source })?;
        let user = match decision.user.or(incoming) {
            Some(u) => u,
            None => {
                return Err(SimError::InvariantViolation {
                    step,
                    detail: "controlled decision without a user".into(),
                })
            }
        };
        let arm = decision.arm;
        if options.check_invariants {
            check_step(policy, &view, &state, &decision, (arm, user)).map_err(|detail| {
                SimError::InvariantViolation {
                    step,
                    detail: format!("{detail}; {}", state_dump(&state)),
                }
            })?;
        }
        phase_counts[decision.phase as usize] += 1;
        let r = env.pull(arm, user);
        reward += r;
        state.record(arm, user, r);
        view.update(&state, arm, user);

        if state.t == marks[next_mark] {
            next_mark += 1;
            let pareto_max = pareto_statistic(&state, config, &derived)
                .into_iter()
                .flatten()
                .reduce(f64::max);
            points.push(TracePoint {
                t: state.t,
                pseudo_regret: pseudo_regret(&state, &derived),
                reward,
                min_user_count: (0..nb).map(|b| state.user_count(b)).min().unwrap_or(0),
                pareto_max,
            });
        }
    }
    if options.check_invariants {
        check_counters(&state).map_err(|detail| SimError::InvariantViolation {
            step: horizon,
            detail,
        })?;
    }
    Ok(RunTrace {
        policy,
        horizon,
        points,
        phase_counts,
        final_state: state,
    })
}

/// How weight matrices are drawn in random-configuration batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSource {
    /// All off-diagonal weights equal to alpha.
    Uniform(f64),
    /// Random metric per run.
    Random,
}

#[derive(Debug, Clone)]
pub enum ConfigSource {
    Fixed(BanditConfig),
    /// A fresh weight matrix and configuration per run.
    Random {
        n_arms: usize,
        n_users: usize,
        weights: WeightSource,
    },
}

impl ConfigSource {
    /// Configuration used by run `run_seed`.
    pub fn config_for(&self, run_seed: u64) -> Result<BanditConfig, SampleError> {
        match self {
            ConfigSource::Fixed(config) => Ok(config.clone()),
            ConfigSource::Random {
                n_arms,
                n_users,
                weights,
            } => {
                let root = CounterRng::new(run_seed);
                let w = match *weights {
                    WeightSource::Uniform(alpha) => WeightMatrix::uniform(*n_users, alpha),
                    WeightSource::Random => {
                        sample_weights_with(*n_users, &mut root.fork(tags::WEIGHTS))
                    }
                };
                sample_config_with(*n_arms, &w, &mut root.fork(tags::CONFIG))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchSpec {
    pub source: ConfigSource,
    pub policies: Vec<PolicyKind>,
    pub users: UserSequence,
    pub horizon: u64,
    pub n_runs: usize,
    pub master_seed: u64,
    pub options: RunOptions,
    /// Worker count; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

/// Seed of run `run`.
pub fn run_seed(master_seed: u64, run: usize) -> u64 {
    master_seed ^ run as u64
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub checkpoints: Vec<u64>,
    /// Traces per policy, in the order of [`BatchSpec::policies`], each
    /// ordered by run index.
    pub traces: Vec<(PolicyKind, Vec<RunTrace>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub policy: String,
    pub mean: f64,
    pub std: f64,
    pub n_runs: usize,
}

/// Runs every `(policy, run)` pair, possibly in parallel. Results do not
/// depend on the number of workers.
pub fn batch(spec: &BatchSpec) -> Result<BatchResult, SimError> {
    assert!(spec.n_runs >= 1, "at least one run");
    let jobs: Vec<(usize, usize)> = (0..spec.policies.len())
        .flat_map(|p| (0..spec.n_runs).map(move |r| (p, r)))
        .collect();
    let work = || {
        jobs.par_iter()
            .map(|&(p, r)| {
                let seed = run_seed(spec.master_seed, r);
                let config = spec
                    .source
                    .config_for(seed)
                    .map_err(|e| SimError::Run {
                        run: r,
                        source: Box::new(e.into()),
                    })?;
                run(
                    &config,
                    spec.policies[p],
                    &spec.users,
                    spec.horizon,
                    seed,
                    &spec.options,
                )
                .map_err(|e| SimError::Run {
                    run: r,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<RunTrace>, SimError>>()
    };
    let all = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SimError::ThreadPool(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let mut all = all.into_iter();
    let traces = spec
        .policies
        .iter()
        .map(|&p| (p, all.by_ref().take(spec.n_runs).collect()))
        .collect();
    Ok(BatchResult {
        checkpoints: spec.options.checkpoints(spec.horizon),
        traces,
    })
}

/// Mean and sample standard deviation (0 for a single value), summed in
/// order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl BatchResult {
    /// Mean and standard deviation of pseudo-regret per checkpoint and
    /// policy, policy-major.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut rows = Vec::new();
        for (policy, traces) in &self.traces {
            for (k, &t) in self.checkpoints.iter().enumerate() {
                let values: Vec<f64> = traces.iter().map(|tr| tr.points[k].pseudo_regret).collect();
                let (mean, std) = mean_std(&values);
                rows.push(AggregateRow {
                    t,
                    policy: policy.id().to_string(),
                    mean,
                    std,
                    n_runs: traces.len(),
                });
            }
        }
        rows
    }

    pub fn traces_for(&self, policy: PolicyKind) -> Option<&[RunTrace]> {
        self.traces
            .iter()
            .find(|(p, _)| *p == policy)
            .map(|(_, t)| t.as_slice())
    }
}

/// Writes `t,policy,mean_regret,std_regret,n_runs`.
pub fn write_aggregate_csv<W: io::Write>(out: W, rows: &[AggregateRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "policy", "mean_regret", "std_regret", "n_runs"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.policy.clone(),
            r.mean.to_string(),
            r.std.to_string(),
            r.n_runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `t,policy,run,pseudo_regret,min_Nb,pareto_max_over_arms`; an
/// undefined Pareto statistic is an empty field.
pub fn write_trace_csv<W: io::Write>(out: W, result: &BatchResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "policy",
        "run",
        "pseudo_regret",
        "min_Nb",
        "pareto_max_over_arms",
    ])?;
    for (policy, traces) in &result.traces {
        for (run, trace) in traces.iter().enumerate() {
            for p in &trace.points {
                w.write_record([
                    p.t.to_string(),
                    policy.id().to_string(),
                    run.to_string(),
                    p.pseudo_regret.to_string(),
                    p.min_user_count.to_string(),
                    p.pareto_max.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
