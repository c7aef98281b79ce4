//! Weight matrices, bandit configurations and their derived quantities.
//!
//! A configuration is an `n_arms x n_users` matrix of Bernoulli means. The
//! weight matrix bounds how far two users' means may drift apart on any arm;
//! a configuration is compatible with it when
//! `max_a |mu[a][b] - mu[a][b']| <= w[b][b']` for every pair of users.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, PivotOrder};
use crate::rng::CounterRng;

/// Slack used when comparing sums of decimal weights (triangle inequality,
/// structure bound). Boundary *equality* for strict membership is exact.
pub const METRIC_TOLERANCE: f64 = 1e-12;

/// Gibbs sweeps per arm in [`sample_config`].
pub const GIBBS_SWEEPS: usize = 50;
/// Means drawn by [`sample_config`] stay inside `(DELTA, 1 - DELTA)`.
pub const SAMPLER_MARGIN: f64 = 1e-3;
/// Redraws before [`sample_config`] gives up.
pub const SAMPLER_MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("weight matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("weight matrix must have at least one user")]
    Empty,
    #[error("weight w[{0}][{1}] = {2} is outside [0, 1]")]
    WeightOutOfRange(usize, usize, f64),
    #[error("means matrix has {got} rows, expected {expected} arms")]
    ArmCount { got: usize, expected: usize },
    #[error("means row {arm} has {got} entries, expected {expected} users")]
    UserCount {
        arm: usize,
        got: usize,
        expected: usize,
    },
    #[error("mean mu[{0}][{1}] = {2} is outside [0, 1]")]
    MeanOutOfRange(usize, usize, f64),
    #[error("weights are {got}x{got} but the configuration has {expected} users")]
    WeightDimension { got: usize, expected: usize },
    #[error("n_arms and n_users must be positive")]
    ZeroDimension,
    #[error("cannot read configuration: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed configuration: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("sampler produced no strict member after {0} attempts")]
    Exhausted(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Symmetric matrix of user-to-user weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n_users: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    /// Builds a matrix after checking shape and range. Metric properties are
    /// checked separately by [`validate_weights`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ConfigError> {
        let n = rows.len();
        if n == 0 {
            return Err(ConfigError::Empty);
        }
        let mut w = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(ConfigError::NotSquare {
                    row: i,
                    len: row.len(),
                    expected: n,
                });
            }
            for (j, &x) in row.iter().enumerate() {
                if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
                    return Err(ConfigError::WeightOutOfRange(i, j, x));
                }
                w.push(x);
            }
        }
        Ok(WeightMatrix { n_users: n, w })
    }

    /// `omega_alpha`: every off-diagonal weight equal to `alpha`.
    pub fn uniform(n_users: usize, alpha: f64) -> Self {
        assert!(n_users > 0, "at least one user");
        assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1]");
        let mut w = vec![alpha; n_users * n_users];
        for b in 0..n_users {
            w[b * n_users + b] = 0.0;
        }
        WeightMatrix { n_users, w }
    }

    /// The structure-free matrix `omega_1`.
    pub fn ones(n_users: usize) -> Self {
        Self::uniform(n_users, 1.0)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    #[inline]
    pub fn get(&self, b: usize, b2: usize) -> f64 {
        self.w[b * self.n_users + b2]
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.w[b * self.n_users..(b + 1) * self.n_users]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_users).map(|b| self.row(b).to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightViolation {
    NonZeroDiagonal { user: usize, value: f64 },
    NonPositive { user: usize, other: usize },
    Asymmetric { user: usize, other: usize },
    Triangle { user: usize, other: usize, via: usize },
}

impl fmt::Display for WeightViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            WeightViolation::NonZeroDiagonal { user, value } => {
                write!(f, "diagonal w[{user}][{user}] = {value} is not zero")
            }
            WeightViolation::NonPositive { user, other } => {
                write!(f, "off-diagonal w[{user}][{other}] is not positive")
            }
            WeightViolation::Asymmetric { user, other } => {
                write!(f, "w[{user}][{other}] != w[{other}][{user}]")
            }
            WeightViolation::Triangle { user, other, via } => write!(
                f,
                "triangle inequality fails: w[{user}][{other}] > w[{user}][{via}] + w[{via}][{other}]"
            ),
        }
    }
}

/// Lists every violation of the metric weight property. Pairs are reported
/// once, with `user < other`.
pub fn validate_weights(w: &WeightMatrix) -> Vec<WeightViolation> {
    let n = w.n_users();
    let mut out = Vec::new();
    for b in 0..n {
        if w.get(b, b) != 0.0 {
            out.push(WeightViolation::NonZeroDiagonal {
                user: b,
                value: w.get(b, b),
            });
        }
    }
    for b in 0..n {
        for b2 in (b + 1)..n {
            if w.get(b, b2) <= 0.0 || w.get(b2, b) <= 0.0 {
                out.push(WeightViolation::NonPositive { user: b, other: b2 });
            }
            if w.get(b, b2) != w.get(b2, b) {
                out.push(WeightViolation::Asymmetric { user: b, other: b2 });
            }
        }
    }
    for b in 0..n {
        for b2 in (b + 1)..n {
            for via in 0..n {
                if via == b || via == b2 {
                    continue;
                }
                if w.get(b, b2) > w.get(b, via) + w.get(via, b2) + METRIC_TOLERANCE {
                    out.push(WeightViolation::Triangle {
                        user: b,
                        other: b2,
                        via,
                    });
                }
            }
        }
    }
    out
}

/// Mean matrix plus the weight matrix it is meant to be compatible with.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditConfig {
    n_arms: usize,
    n_users: usize,
    mu: Vec<f64>,
    weights: WeightMatrix,
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    n_arms: usize,
    n_users: usize,
    means: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

impl BanditConfig {
    /// `means[a][b]` is the mean of arm `a` for user `b`.
    ///
    /// Means are accepted on the closed interval `[0, 1]`; the bundled fixed
    /// configuration has a mean of exactly `1.0`.
    pub fn new(means: &[Vec<f64>], weights: WeightMatrix) -> Result<Self, ConfigError> {
        let n_arms = means.len();
        if n_arms == 0 {
            return Err(ConfigError::ZeroDimension);
        }
        let n_users = weights.n_users();
        let mut mu = Vec::with_capacity(n_arms * n_users);
        for (a, row) in means.iter().enumerate() {
            if row.len() != n_users {
                return Err(ConfigError::UserCount {
                    arm: a,
                    got: row.len(),
                    expected: n_users,
                });
            }
            for (b, &m) in row.iter().enumerate() {
                if !(m.is_finite() && (0.0..=1.0).contains(&m)) {
                    return Err(ConfigError::MeanOutOfRange(a, b, m));
                }
                mu.push(m);
            }
        }
        Ok(BanditConfig {
            n_arms,
            n_users,
            mu,
            weights,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = serde_json::from_str(text)?;
        if file.n_arms == 0 || file.n_users == 0 {
            return Err(ConfigError::ZeroDimension);
        }
        if file.means.len() != file.n_arms {
            return Err(ConfigError::ArmCount {
                got: file.means.len(),
                expected: file.n_arms,
            });
        }
        let weights = WeightMatrix::from_rows(&file.weights)?;
        if weights.n_users() != file.n_users {
            return Err(ConfigError::WeightDimension {
                got: weights.n_users(),
                expected: file.n_users,
            });
        }
        BanditConfig::new(&file.means, weights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Pretty-printed JSON with fields `n_arms`, `n_users`, `means`, `weights`.
    pub fn to_json(&self) -> String {
        let file = ConfigFile {
            n_arms: self.n_arms,
            n_users: self.n_users,
            means: (0..self.n_arms).map(|a| self.arm_row(a).to_vec()).collect(),
            weights: self.weights.to_rows(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    #[inline]
    pub fn mean(&self, arm: usize, user: usize) -> f64 {
        self.mu[arm * self.n_users + user]
    }

    pub fn arm_row(&self, arm: usize) -> &[f64] {
        &self.mu[arm * self.n_users..(arm + 1) * self.n_users]
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    /// Same means under a different weight matrix.
    pub fn with_weights(&self, weights: WeightMatrix) -> Result<Self, ConfigError> {
        if weights.n_users() != self.n_users {
            return Err(ConfigError::WeightDimension {
                got: weights.n_users(),
                expected: self.n_users,
            });
        }
        Ok(BanditConfig {
            weights,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MembershipViolation {
    /// `|mu[arm][user] - mu[arm][other]| > w[user][other]`.
    Bound {
        arm: usize,
        user: usize,
        other: usize,
        gap: f64,
        weight: f64,
    },
    /// `mu[arm][other] == mu*_user - w[user][other]` for a sub-optimal couple.
    Boundary {
        arm: usize,
        user: usize,
        other: usize,
    },
}

impl fmt::Display for MembershipViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MembershipViolation::Bound {
                arm,
                user,
                other,
                gap,
                weight,
            } => write!(
                f,
                "arm {arm}: |mu[{arm}][{user}] - mu[{arm}][{other}]| = {gap} exceeds w[{user}][{other}] = {weight}"
            ),
            MembershipViolation::Boundary { arm, user, other } => write!(
                f,
                "arm {arm}: mu[{arm}][{other}] lies exactly on mu*_{user} - w[{user}][{other}]"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub violations: Vec<MembershipViolation>,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Membership in the closed structure set, and with `strict` additionally no
/// boundary equality on any sub-optimal couple.
pub fn check_membership(config: &BanditConfig, strict: bool) -> Membership {
    let w = config.weights();
    let (na, nb) = (config.n_arms(), config.n_users());
    let mut violations = Vec::new();
    for a in 0..na {
        for b in 0..nb {
            for b2 in (b + 1)..nb {
                let gap = (config.mean(a, b) - config.mean(a, b2)).abs();
                let weight = w.get(b, b2);
                if gap > weight + METRIC_TOLERANCE {
                    violations.push(MembershipViolation::Bound {
                        arm: a,
                        user: b,
                        other: b2,
                        gap,
                        weight,
                    });
                }
            }
        }
    }
    if strict {
        let d = derive(config);
        for a in 0..na {
            for b in 0..nb {
                if d.is_optimal(a, b) {
                    continue;
                }
                for b2 in 0..nb {
                    if config.mean(a, b2) == d.mu_star[b] - w.get(b, b2) {
                        violations.push(MembershipViolation::Boundary {
                            arm: a,
                            user: b,
                            other: b2,
                        });
                    }
                }
            }
        }
    }
    Membership { violations }
}

/// Per-user optima, gaps and informative sets of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedQuantities {
    n_arms: usize,
    n_users: usize,
    /// Best mean of each user.
    pub mu_star: Vec<f64>,
    /// Arms attaining `mu_star[b]`, ascending.
    pub opt_arms: Vec<Vec<usize>>,
    gaps: Vec<f64>,
    info_sets: Vec<Vec<usize>>,
}

impl DerivedQuantities {
    #[inline]
    pub fn gap(&self, arm: usize, user: usize) -> f64 {
        self.gaps[arm * self.n_users + user]
    }

    #[inline]
    pub fn is_optimal(&self, arm: usize, user: usize) -> bool {
        self.gap(arm, user) == 0.0
    }

    /// Users `b'` with `mu[arm][b'] < mu*_user - w[user][b']`; empty for
    /// optimal couples.
    pub fn info_set(&self, arm: usize, user: usize) -> &[usize] {
        &self.info_sets[arm * self.n_users + user]
    }

    /// Users for which `arm` is sub-optimal.
    pub fn suboptimal_users(&self, arm: usize) -> Vec<usize> {
        (0..self.n_users)
            .filter(|&b| !self.is_optimal(arm, b))
            .collect()
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }
}

pub fn derive(config: &BanditConfig) -> DerivedQuantities {
    let (na, nb) = (config.n_arms(), config.n_users());
    let w = config.weights();
    let mu_star: Vec<f64> = (0..nb)
        .map(|b| {
            (0..na)
                .map(|a| config.mean(a, b))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let opt_arms = (0..nb)
        .map(|b| (0..na).filter(|&a| config.mean(a, b) == mu_star[b]).collect())
        .collect();
    let mut gaps = Vec::with_capacity(na * nb);
    let mut info_sets = Vec::with_capacity(na * nb);
    for a in 0..na {
        for b in 0..nb {
            let gap = mu_star[b] - config.mean(a, b);
            gaps.push(gap);
            if gap == 0.0 {
                info_sets.push(Vec::new());
            } else {
                info_sets.push(
                    (0..nb)
                        .filter(|&b2| config.mean(a, b2) < mu_star[b] - w.get(b, b2))
                        .collect(),
                );
            }
        }
    }
    DerivedQuantities {
        n_arms: na,
        n_users: nb,
        mu_star,
        opt_arms,
        gaps,
        info_sets,
    }
}

/// Verdict of [`is_non_peculiar`].
#[derive(Debug, Clone, PartialEq)]
pub struct Peculiarity {
    /// Users with more than one optimal arm.
    pub tied_users: Vec<usize>,
    /// Arms whose allocation LP looks non-unique.
    pub ambiguous_arms: Vec<usize>,
}

impl Peculiarity {
    pub fn is_non_peculiar(&self) -> bool {
        self.tied_users.is_empty() && self.ambiguous_arms.is_empty()
    }
}

/// Distance above which two LP solutions count as different.
pub const UNIQUENESS_TOLERANCE: f64 = 1e-6;
/// Magnitude of the random objective perturbation in the uniqueness test.
pub const UNIQUENESS_PERTURBATION: f64 = 1e-9;

/// Unique optimal arm per user, and a unique lower-bound LP solution.
///
/// LP uniqueness is a heuristic: each per-arm LP (with `beta = 1`) is solved
/// with forward and reverse pivot orders and once with a `1e-9` random
/// perturbation of the objective; differing solutions mark the arm ambiguous.
pub fn is_non_peculiar(config: &BanditConfig) -> Peculiarity {
    let d = derive(config);
    let tied_users = (0..config.n_users())
        .filter(|&b| d.opt_arms[b].len() > 1)
        .collect();
    let beta = vec![1.0; config.n_users()];
    let mut ambiguous_arms = Vec::new();
    let mut rng = CounterRng::new(0x5eed).fork(crate::rng::tags::PERTURBATION);
    for instance in lp::build_instance(config, &beta) {
        let forward = lp::solve_with(&instance, PivotOrder::Forward);
        let reverse = lp::solve_with(&instance, PivotOrder::Reverse);
        let mut perturbed = instance.clone();
        for c in perturbed.objective.iter_mut() {
            *c += UNIQUENESS_PERTURBATION * rng.next_uniform();
        }
        let perturbed = lp::solve_with(&perturbed, PivotOrder::Forward);
        let same = match (&forward, &reverse, &perturbed) {
            (Ok(f), Ok(r), Ok(p)) => {
                let close = |x: &[f64], y: &[f64]| {
                    x.iter()
                        .zip(y)
                        .all(|(u, v)| (u - v).abs() <= UNIQUENESS_TOLERANCE)
                };
                close(&f.allocation, &r.allocation) && close(&f.allocation, &p.allocation)
            }
            _ => false,
        };
        if !same {
            ambiguous_arms.push(instance.arm);
        }
    }
    Peculiarity {
        tied_users,
        ambiguous_arms,
    }
}

/// Random metric weight matrix: i.i.d. uniform entries, symmetrized by
/// averaging, zero diagonal, then closed under shortest paths so the
/// triangle inequality holds.
pub fn sample_weights(n_users: usize, seed: u64) -> WeightMatrix {
    sample_weights_with(n_users, &mut CounterRng::new(seed))
}

pub fn sample_weights_with(n_users: usize, rng: &mut CounterRng) -> WeightMatrix {
    assert!(n_users > 0, "at least one user");
    let n = n_users;
    let raw: Vec<f64> = (0..n * n).map(|_| rng.next_uniform()).collect();
    let mut w = vec![0.0; n * n];
    for b in 0..n {
        for b2 in 0..n {
            if b != b2 {
                w[b * n + b2] = 0.5 * (raw[b * n + b2] + raw[b2 * n + b]);
            }
        }
    }
    metric_closure(&mut w, n);
    WeightMatrix { n_users: n, w }
}

/// All-pairs shortest paths (Floyd-Warshall) in place.
pub(crate) fn metric_closure(w: &mut [f64], n: usize) {
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let through = w[i * n + k] + w[k * n + j];
                if through < w[i * n + j] {
                    w[i * n + j] = through;
                }
            }
        }
    }
}

/// Draws a configuration strictly inside the structure set.
///
/// Arms are independent given the weights. Each arm starts from a common
/// uniform mean and is refined by [`GIBBS_SWEEPS`] Gibbs sweeps that resample
/// `mu[a][b]` uniformly on its feasible interval
/// `[max_b' mu[a][b'] - w[b][b'], min_b' mu[a][b'] + w[b][b']]`
/// intersected with `(SAMPLER_MARGIN, 1 - SAMPLER_MARGIN)`.
pub fn sample_config(
    n_arms: usize,
    weights: &WeightMatrix,
    seed: u64,
) -> Result<BanditConfig, SampleError> {
    sample_config_with(n_arms, weights, &mut CounterRng::new(seed))
}

pub fn sample_config_with(
    n_arms: usize,
    weights: &WeightMatrix,
    rng: &mut CounterRng,
) -> Result<BanditConfig, SampleError> {
    if n_arms == 0 {
        return Err(ConfigError::ZeroDimension.into());
    }
    let nb = weights.n_users();
    let (lo_bound, hi_bound) = (SAMPLER_MARGIN, 1.0 - SAMPLER_MARGIN);
    for _ in 0..SAMPLER_MAX_ATTEMPTS {
        let mut means = vec![vec![0.0; nb]; n_arms];
        for row in means.iter_mut() {
            let start = rng.uniform_in(lo_bound, hi_bound);
            row.fill(start);
            for _ in 0..GIBBS_SWEEPS {
                for b in 0..nb {
                    let mut lo = lo_bound;
                    let mut hi = hi_bound;
                    for b2 in (0..nb).filter(|&b2| b2 != b) {
                        lo = lo.max(row[b2] - weights.get(b, b2));
                        hi = hi.min(row[b2] + weights.get(b, b2));
                    }
                    row[b] = rng.uniform_in(lo, hi);
                }
            }
        }
        let config = BanditConfig::new(&means, weights.clone())?;
        if check_membership(&config, true).is_member() {
            return Ok(config);
        }
    }
    Err(SampleError::Exhausted(SAMPLER_MAX_ATTEMPTS))
}
