//! Allocation linear programs behind the structured regret lower bound.
//!
//! For a configuration and per-user log-frequencies `beta`, the lower-bound
//! constant is
//!
//! ```text
//! C*(beta) = min  sum_{(a,b) sub-optimal} gap[a][b] n[a][b]
//!            s.t. sum_{b' in B(a,b)} kl(mu[a][b'] | mu*_b - w[b][b']) n[a][b'] >= beta_b
//!                 for every sub-optimal couple (a, b),  n >= 0.
//! ```
//!
//! Variables of arm `a` only appear in arm-`a` constraints, so the program
//! splits into one small LP per arm. Each is solved with the dense simplex in
//! [`simplex`].

mod simplex;

pub use simplex::{minimize_ge, PivotOrder, SimplexError, SimplexOutcome};

use thiserror::Error;

use crate::graph::{derive, sample_config_with, BanditConfig, SampleError, WeightMatrix};
use crate::kl::{kl_plus_raw, ExtReal};
use crate::rng::{tags, CounterRng};

/// Retained constraints must hold to this absolute slack.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;
/// Bound on the complementary-slackness / duality-gap residual.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum LpError {
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("beta has {got} entries, expected {expected}")]
    BetaLength { got: usize, expected: usize },
}

/// One constraint `sum_j coeffs[j] n[j] >= rhs`, owned by couple `(arm, user)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub user: usize,
    pub coeffs: Vec<ExtReal>,
    pub rhs: f64,
}

/// Per-arm allocation LP.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    pub arm: usize,
    /// User of each variable.
    pub users: Vec<usize>,
    /// Gap of each variable.
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// A `+inf` coefficient: any positive mass on that variable satisfies the
    /// row, so in the limit it costs nothing.
    InfiniteCoefficient,
    /// No strictly positive coefficient left.
    NoInformation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    RowsDropped,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub arm: usize,
    /// User of each allocation entry (same order as the instance variables).
    pub users: Vec<usize>,
    pub allocation: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub dropped: Vec<(usize, DropReason)>,
    pub degenerate: bool,
    /// Worst violation among retained rows (0 when feasible).
    pub feasibility_residual: f64,
    /// Worst of duality gap, dual infeasibility and complementary slackness.
    pub certificate_residual: f64,
}

impl LpSolution {
    /// Allocation for `user`, 0 if it is not a variable of this instance.
    pub fn allocation_for(&self, user: usize) -> f64 {
        self.users
            .iter()
            .position(|&u| u == user)
            .map_or(0.0, |j| self.allocation[j])
    }
}

impl LpInstance {
    pub fn n_vars(&self) -> usize {
        self.users.len()
    }

    /// Rows that enter the solve, and the ones dropped with the reason.
    pub fn partition_rows(&self) -> (Vec<&LpRow>, Vec<(usize, DropReason)>) {
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for row in &self.rows {
            if row.coeffs.iter().any(|c| c.is_infinite()) {
                dropped.push((row.user, DropReason::InfiniteCoefficient));
            } else if row.coeffs.iter().all(|c| c.is_zero()) {
                dropped.push((row.user, DropReason::NoInformation));
            } else {
                kept.push(row);
            }
        }
        (kept, dropped)
    }
}

/// One instance per arm that has at least one sub-optimal couple.
pub fn build_instance(config: &BanditConfig, beta: &[f64]) -> Vec<LpInstance> {
    assert_eq!(beta.len(), config.n_users(), "one beta per user");
    let d = derive(config);
    let w = config.weights();
    let mut out = Vec::new();
    for a in 0..config.n_arms() {
        let users = d.suboptimal_users(a);
        if users.is_empty() {
            continue;
        }
        let objective = users.iter().map(|&b| d.gap(a, b)).collect();
        let rows = users
            .iter()
            .map(|&b| LpRow {
                user: b,
                coeffs: users
                    .iter()
                    .map(|&b2| {
                        ExtReal::new(kl_plus_raw(config.mean(a, b2), d.mu_star[b] - w.get(b, b2)))
                            .expect("kl is nonnegative")
                    })
                    .collect(),
                rhs: beta[b],
            })
            .collect();
        out.push(LpInstance {
            arm: a,
            users,
            objective,
            rows,
        });
    }
    out
}

/// Empirical per-arm instance built from running estimates.
///
/// `mu_hat` and `counts` are arm-major `n_arms x n_users`. Variables are the
/// users where `arm` is empirically sub-optimal (zero-gap couples are fixed
/// to 0); rows are the empirically sub-optimal couples `(arm, b)`, with
/// coefficient `kl(mu_hat[arm][b'] | mu_hat*_b - w[b][b'])` on each
/// `b'` of the empirical informative set (pulled at least once and strictly
/// below the target) and 0 elsewhere.
pub fn build_empirical_instance(
    mu_hat: &[f64],
    mu_hat_star: &[f64],
    counts: &[u64],
    weights: &WeightMatrix,
    arm: usize,
    rhs: &[f64],
) -> LpInstance {
    let nb = weights.n_users();
    let row_mu = &mu_hat[arm * nb..(arm + 1) * nb];
    let row_n = &counts[arm * nb..(arm + 1) * nb];
    let users: Vec<usize> = (0..nb).filter(|&b| row_mu[b] < mu_hat_star[b]).collect();
    let objective = users.iter().map(|&b| mu_hat_star[b] - row_mu[b]).collect();
    let rows = users
        .iter()
        .map(|&b| LpRow {
            user: b,
            coeffs: users
                .iter()
                .map(|&b2| {
                    let target = mu_hat_star[b] - weights.get(b, b2);
                    if row_n[b2] > 0 && row_mu[b2] < target {
                        ExtReal::new(kl_plus_raw(row_mu[b2], target)).expect("kl is nonnegative")
                    } else {
                        ExtReal::ZERO
                    }
                })
                .collect(),
            rhs: rhs[b],
        })
        .collect();
    LpInstance {
        arm,
        users,
        objective,
        rows,
    }
}

pub fn solve(instance: &LpInstance) -> Result<LpSolution, LpError> {
    solve_with(instance, PivotOrder::Forward)
}

/// Same contract as [`solve`]; the empirical instances simply tend to have
/// dropped rows.
pub fn solve_empirical(instance: &LpInstance) -> Result<LpSolution, LpError> {
    solve_with(instance, PivotOrder::Forward)
}

pub fn solve_with(instance: &LpInstance, order: PivotOrder) -> Result<LpSolution, LpError> {
    let (kept, dropped) = instance.partition_rows();
    let a: Vec<Vec<f64>> = kept
        .iter()
        .map(|row| row.coeffs.iter().map(|c| c.value()).collect())
        .collect();
    let b: Vec<f64> = kept.iter().map(|row| row.rhs).collect();
    let out = minimize_ge(&instance.objective, &a, &b, order)?;

    let mut feasibility_residual: f64 = 0.0;
    let mut certificate_residual: f64 = 0.0;
    for (i, (row, rhs)) in a.iter().zip(&b).enumerate() {
        let lhs: f64 = row.iter().zip(&out.x).map(|(k, x)| k * x).sum();
        feasibility_residual = feasibility_residual.max(rhs - lhs);
        certificate_residual = certificate_residual.max((out.duals[i] * (lhs - rhs)).abs());
    }
    for j in 0..instance.n_vars() {
        let reduced = instance.objective[j]
            - a.iter()
                .zip(&out.duals)
                .map(|(row, y)| row[j] * y)
                .sum::<f64>();
        certificate_residual = certificate_residual.max(-reduced).max((out.x[j] * reduced).abs());
    }
    let dual_objective: f64 = b.iter().zip(&out.duals).map(|(bi, y)| bi * y).sum();
    certificate_residual = certificate_residual.max((out.objective - dual_objective).abs());

    let status = if !dropped.is_empty() {
        LpStatus::RowsDropped
    } else if out.degenerate {
        LpStatus::Degenerate
    } else {
        LpStatus::Optimal
    };
    Ok(LpSolution {
        arm: instance.arm,
        users: instance.users.clone(),
        allocation: out.x,
        objective: out.objective,
        status,
        dropped,
        degenerate: out.degenerate,
        feasibility_residual: feasibility_residual.max(0.0),
        certificate_residual,
    })
}

/// Solves every per-arm LP of `config`.
pub fn solve_all(config: &BanditConfig, beta: &[f64]) -> Result<Vec<LpSolution>, LpError> {
    check_beta(config, beta)?;
    build_instance(config, beta).iter().map(solve).collect()
}

/// Structured lower-bound constant: sum of the per-arm LP optima.
pub fn c_star(config: &BanditConfig, beta: &[f64]) -> Result<f64, LpError> {
    Ok(solve_all(config, beta)?.iter().map(|s| s.objective).sum())
}

/// Closed form without structure:
/// `sum_b beta_b sum_{a sub-optimal} gap[a][b] / kl(mu[a][b] | mu*_b)`.
pub fn agnostic_constant(config: &BanditConfig, beta: &[f64]) -> Result<f64, LpError> {
    check_beta(config, beta)?;
    let d = derive(config);
    let mut total = 0.0;
    for b in 0..config.n_users() {
        let mut per_user = 0.0;
        for a in 0..config.n_arms() {
            if d.is_optimal(a, b) {
                continue;
            }
            let kl = kl_plus_raw(config.mean(a, b), d.mu_star[b]);
            // gap / inf = 0
            if kl.is_finite() {
                per_user += d.gap(a, b) / kl;
            }
        }
        total += beta[b] * per_user;
    }
    Ok(total)
}

fn check_beta(config: &BanditConfig, beta: &[f64]) -> Result<(), LpError> {
    if beta.len() != config.n_users() {
        return Err(LpError::BetaLength {
            got: beta.len(),
            expected: config.n_users(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioPoint {
    pub alpha: f64,
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Monte-Carlo estimate of `E[C*_{w_alpha}(1, nu) / C*_{w_1}(1, nu)]` with
/// `nu` drawn from the structure set of `w_alpha`, for each alpha.
///
/// Samples whose agnostic constant is 0 (no sub-optimal couple) count as
/// ratio 1. Each alpha uses its own seeded stream, so adding grid points does
/// not change existing rows.
pub fn ratio_curve(
    alpha_grid: &[f64],
    n_arms: usize,
    n_users: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<RatioPoint>, LpError> {
    assert!(n_samples >= 1, "at least one sample");
    let root = CounterRng::new(seed).fork(tags::CONFIG);
    alpha_grid
        .iter()
        .map(|&alpha| {
            let weights = WeightMatrix::uniform(n_users, alpha);
            let vacuous = weights == WeightMatrix::ones(n_users);
            let mut rng = root.fork(alpha.to_bits());
            let ones = vec![1.0; n_users];
            let mut ratios = Vec::with_capacity(n_samples);
            for _ in 0..n_samples {
                let config = sample_config_with(n_arms, &weights, &mut rng)?;
                let agnostic = agnostic_constant(&config, &ones)?;
                // under w_1 both constants are the same quantity
                let structured = if vacuous {
                    agnostic
                } else {
                    c_star(&config, &ones)?
                };
                ratios.push(if agnostic > 0.0 {
                    structured / agnostic
                } else {
                    1.0
                });
            }
            let n = ratios.len() as f64;
            let mean = ratios.iter().sum::<f64>() / n;
            let std_error = if ratios.len() > 1 {
                let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            Ok(RatioPoint {
                alpha,
                mean,
                std_error,
                n_samples,
            })
        })
        .collect()
}
