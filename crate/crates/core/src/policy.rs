//! IMED and its graph-structured variants as deterministic state machines.
//!
//! Every strategy reads an [`EmpiricalView`] of the current counts and
//! returns a [`Decision`]. Ties in any argmin or argmax are broken towards
//! the smallest `(arm, user)` pair. Couples that were never pulled get index
//! `-inf`, so each couple is pulled once before any finite comparison.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::WeightMatrix;
use crate::kl::kl_raw;
use crate::lp::{self, LpError};

/// Lower floor applied to estimated log-frequencies.
pub const BETA_HAT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    /// Per-user IMED, blind to the graph structure.
    Imed,
    /// Global index argmin over couples (controlled scenario).
    ImedGs,
    /// Index argmin plus LP tracking and sparse forced exploration (controlled).
    ImedGsStar,
    /// Normalized-index argmin for the imposed user (uncontrolled).
    ImedGs2,
    /// Uncontrolled tracking variant with delayed exploration registers.
    ImedGsStar2,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Imed,
        PolicyKind::ImedGs,
        PolicyKind::ImedGsStar,
        PolicyKind::ImedGs2,
        PolicyKind::ImedGsStar2,
    ];

    pub fn id(self) -> &'static str {
        match self {
            PolicyKind::Imed => "imed",
            PolicyKind::ImedGs => "imed-gs",
            PolicyKind::ImedGsStar => "imed-gs-star",
            PolicyKind::ImedGs2 => "imed-gs2",
            PolicyKind::ImedGsStar2 => "imed-gs-star2",
        }
    }

    /// Whether the strategy picks the user itself.
    pub fn chooses_user(self) -> bool {
        matches!(self, PolicyKind::ImedGs | PolicyKind::ImedGsStar)
    }

    /// Whether the strategy needs an imposed user (IMED works either way).
    pub fn needs_user(self) -> bool {
        matches!(
            self,
            PolicyKind::Imed | PolicyKind::ImedGs2 | PolicyKind::ImedGsStar2
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown policy `{0}` (expected one of imed, imed-gs, imed-gs-star, imed-gs2, imed-gs-star2)")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.id() == s.trim())
            .ok_or_else(|| UnknownPolicy(s.to_string()))
    }
}

/// Mutable per-run state shared by all strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub n_arms: usize,
    pub n_users: usize,
    /// Pull counts, arm-major.
    pub counts: Vec<u64>,
    /// Reward sums, arm-major.
    pub reward_sums: Vec<f64>,
    pub t: u64,
    /// Exploration counter `c_a`.
    pub counters: Vec<u64>,
    /// Doubling threshold `c+_a`.
    pub counters_plus: Vec<u64>,
    /// Number of forced-exploration rounds of each arm.
    pub forced_rounds: Vec<u64>,
    /// Delayed forced-exploration register `FE(b)`.
    pub forced_register: Vec<Option<usize>>,
    /// Delayed exploration register `E(b)`.
    pub explore_register: Vec<Option<usize>>,
    pub register_overwrites: u64,
    pub lp_solves: u64,
}

impl PolicyState {
    pub fn new(n_arms: usize, n_users: usize) -> Self {
        PolicyState {
            n_arms,
            n_users,
            counts: vec![0; n_arms * n_users],
            reward_sums: vec![0.0; n_arms * n_users],
            t: 0,
            counters: vec![1; n_arms],
            counters_plus: vec![1; n_arms],
            forced_rounds: vec![0; n_arms],
            forced_register: vec![None; n_users],
            explore_register: vec![None; n_users],
            register_overwrites: 0,
            lp_solves: 0,
        }
    }

    #[inline]
    pub fn count(&self, arm: usize, user: usize) -> u64 {
        self.counts[arm * self.n_users + user]
    }

    pub fn user_count(&self, user: usize) -> u64 {
        (0..self.n_arms).map(|a| self.count(a, user)).sum()
    }

    pub fn record(&mut self, arm: usize, user: usize, reward: f64) {
        let i = arm * self.n_users + user;
        self.counts[i] += 1;
        self.reward_sums[i] += reward;
        self.t += 1;
    }
}

/// Estimates derived from a [`PolicyState`], plus the index of every couple.
#[derive(Debug, Clone)]
pub struct EmpiricalView<'w> {
    weights: &'w WeightMatrix,
    n_arms: usize,
    n_users: usize,
    t: u64,
    counts: Vec<u64>,
    /// Empirical means, 0 for unpulled couples.
    pub mu_hat: Vec<f64>,
    pub mu_hat_star: Vec<f64>,
    optimal: Vec<bool>,
    pub user_counts: Vec<u64>,
    /// `ln N_b / ln t`, floored; 1 until every user has been seen.
    pub beta_hat: Vec<f64>,
    index: Vec<f64>,
}

impl<'w> EmpiricalView<'w> {
    pub fn new(state: &PolicyState, weights: &'w WeightMatrix) -> Self {
        assert_eq!(weights.n_users(), state.n_users, "weights match users");
        let (na, nb) = (state.n_arms, state.n_users);
        let mut view = EmpiricalView {
            weights,
            n_arms: na,
            n_users: nb,
            t: 0,
            counts: vec![0; na * nb],
            mu_hat: vec![0.0; na * nb],
            mu_hat_star: vec![0.0; nb],
            optimal: vec![false; na * nb],
            user_counts: vec![0; nb],
            beta_hat: vec![1.0; nb],
            index: vec![0.0; na * nb],
        };
        view.refresh(state);
        view
    }

    /// Recomputes every estimate and index from `state`.
    pub fn refresh(&mut self, state: &PolicyState) {
        let (na, nb) = (self.n_arms, self.n_users);
        self.t = state.t;
        self.counts.copy_from_slice(&state.counts);
        for i in 0..na * nb {
            let n = state.counts[i];
            self.mu_hat[i] = if n > 0 {
                state.reward_sums[i] / n as f64
            } else {
                0.0
            };
        }
        for b in 0..nb {
            let mut star = f64::NEG_INFINITY;
            let mut total = 0;
            for a in 0..na {
                star = star.max(self.mu_hat[a * nb + b]);
                total += self.counts[a * nb + b];
            }
            self.mu_hat_star[b] = star;
            self.user_counts[b] = total;
            for a in 0..na {
                self.optimal[a * nb + b] = self.mu_hat[a * nb + b] == star;
            }
        }
        self.update_beta_hat();
        for a in 0..na {
            for b in 0..nb {
                self.index[a * nb + b] = self.compute_index(a, b);
            }
        }
    }

    /// Brings the view up to date after a single pull of `(arm, user)`.
    ///
    /// Only row `arm` and column `user` of the index table can change, so
    /// this is equivalent to [`refresh`](Self::refresh) at a fraction of the
    /// cost.
    pub fn update(&mut self, state: &PolicyState, arm: usize, user: usize) {
        let (na, nb) = (self.n_arms, self.n_users);
        debug_assert_eq!(state.t, self.t + 1, "one pull since the last update");
        self.t = state.t;
        let i = arm * nb + user;
        self.counts[i] = state.counts[i];
        self.mu_hat[i] = state.reward_sums[i] / state.counts[i] as f64;
        self.user_counts[user] += 1;
        let mut star = f64::NEG_INFINITY;
        for a in 0..na {
            star = star.max(self.mu_hat[a * nb + user]);
        }
        self.mu_hat_star[user] = star;
        for a in 0..na {
            self.optimal[a * nb + user] = self.mu_hat[a * nb + user] == star;
        }
        self.update_beta_hat();
        for b in 0..nb {
            self.index[arm * nb + b] = self.compute_index(arm, b);
        }
        for a in (0..na).filter(|&a| a != arm) {
            self.index[a * nb + user] = self.compute_index(a, user);
        }
    }

    fn update_beta_hat(&mut self) {
        let all_seen = self.user_counts.iter().all(|&n| n > 0);
        let log_t = (self.t as f64).ln();
        for (beta, &n) in self.beta_hat.iter_mut().zip(&self.user_counts) {
            *beta = if all_seen && self.t > 1 {
                ((n as f64).ln() / log_t).max(BETA_HAT_FLOOR)
            } else {
                1.0
            };
        }
    }

    fn compute_index(&self, a: usize, b: usize) -> f64 {
        let nb = self.n_users;
        let n = self.counts[a * nb + b];
        if n == 0 {
            return f64::NEG_INFINITY;
        }
        if self.optimal[a * nb + b] {
            return (n as f64).ln();
        }
        let star = self.mu_hat_star[b];
        let w = self.weights.row(b);
        let mut sum = 0.0;
        for b2 in 0..nb {
            let n2 = self.counts[a * nb + b2];
            let m2 = self.mu_hat[a * nb + b2];
            let target = star - w[b2];
            if n2 > 0 && m2 < target {
                sum += n2 as f64 * kl_raw(m2, target) + (n2 as f64).ln();
            }
        }
        sum
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn weights(&self) -> &WeightMatrix {
        self.weights
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn count(&self, arm: usize, user: usize) -> u64 {
        self.counts[arm * self.n_users + user]
    }

    #[inline]
    pub fn mean(&self, arm: usize, user: usize) -> f64 {
        self.mu_hat[arm * self.n_users + user]
    }

    /// Whether `(arm, user)` is currently an empirically optimal couple.
    #[inline]
    pub fn is_optimal(&self, arm: usize, user: usize) -> bool {
        self.optimal[arm * self.n_users + user]
    }

    /// Whether `other` is in the empirical informative set of `(arm, user)`.
    pub fn in_info_set(&self, arm: usize, user: usize, other: usize) -> bool {
        !self.is_optimal(arm, user)
            && self.count(arm, other) > 0
            && self.mean(arm, other) < self.mu_hat_star[user] - self.weights.get(user, other)
    }

    pub fn info_set(&self, arm: usize, user: usize) -> Vec<usize> {
        (0..self.n_users)
            .filter(|&b2| self.in_info_set(arm, user, b2))
            .collect()
    }

    /// Sum of `N kl(...)` over the informative set, without the log terms.
    pub fn transport_cost(&self, arm: usize, user: usize) -> f64 {
        self.info_set(arm, user)
            .into_iter()
            .map(|b2| {
                let target = self.mu_hat_star[user] - self.weights.get(user, b2);
                self.count(arm, b2) as f64 * kl_raw(self.mean(arm, b2), target)
            })
            .sum()
    }

    /// Structured IMED index of `(arm, user)`.
    #[inline]
    pub fn index(&self, arm: usize, user: usize) -> f64 {
        self.index[arm * self.n_users + user]
    }

    /// Index divided by the user's estimated log-frequency.
    #[inline]
    pub fn normalized_index(&self, arm: usize, user: usize) -> f64 {
        self.index(arm, user) / self.beta_hat[user]
    }

    /// Structure-free IMED index `N kl(mu_hat | mu_hat*) + ln N`.
    pub fn agnostic_index(&self, arm: usize, user: usize) -> f64 {
        let n = self.count(arm, user);
        if n == 0 {
            return f64::NEG_INFINITY;
        }
        n as f64 * kl_raw(self.mean(arm, user), self.mu_hat_star[user]) + (n as f64).ln()
    }
}

/// Why a couple was pulled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    /// First pull of a couple (index `-inf`).
    Initial,
    Exploit,
    /// Index-driven pull of an empirically sub-optimal couple.
    Explore,
    ExploreTrack,
    ExploreForced,
    DelayedForced,
    DelayedTrack,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Initial,
        Phase::Exploit,
        Phase::Explore,
        Phase::ExploreTrack,
        Phase::ExploreForced,
        Phase::DelayedForced,
        Phase::DelayedTrack,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phase::Initial => "initial",
            Phase::Exploit => "exploit",
            Phase::Explore => "explore",
            Phase::ExploreTrack => "explore-track",
            Phase::ExploreForced => "explore-forced",
            Phase::DelayedForced => "delayed-forced",
            Phase::DelayedTrack => "delayed-track",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub arm: usize,
    /// Chosen user in the controlled scenario, `None` when imposed.
    pub user: Option<usize>,
    pub phase: Phase,
    /// Minimum-index couple that drove the decision, when there is one.
    pub selected: Option<(usize, usize)>,
    /// `max (N^opt - N)` over the tracking candidates, on tracking steps.
    pub tracking_margin: Option<f64>,
}

impl Decision {
    fn pull(arm: usize, user: Option<usize>, phase: Phase) -> Self {
        Decision {
            arm,
            user,
            phase,
            selected: None,
            tracking_margin: None,
        }
    }
}

fn argmin_by(len: usize, mut key: impl FnMut(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_val = key(0);
    for i in 1..len {
        let v = key(i);
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

fn global_argmin(view: &EmpiricalView, key: impl Fn(usize, usize) -> f64) -> (usize, usize) {
    let nb = view.n_users();
    let i = argmin_by(view.n_arms() * nb, |i| key(i / nb, i % nb));
    (i / nb, i % nb)
}

fn exploit_or_explore(view: &EmpiricalView, arm: usize, user: usize) -> Phase {
    if view.count(arm, user) == 0 {
        Phase::Initial
    } else if view.is_optimal(arm, user) {
        Phase::Exploit
    } else {
        Phase::Explore
    }
}

/// Per-user IMED on the imposed user.
pub fn step_imed(view: &EmpiricalView, user: usize) -> Decision {
    let arm = argmin_by(view.n_arms(), |a| view.agnostic_index(a, user));
    Decision::pull(arm, None, exploit_or_explore(view, arm, user))
}

/// Pulls a couple of minimal index.
pub fn step_imed_gs(view: &EmpiricalView) -> Decision {
    let (arm, user) = global_argmin(view, |a, b| view.index(a, b));
    Decision {
        selected: Some((arm, user)),
        ..Decision::pull(arm, Some(user), exploit_or_explore(view, arm, user))
    }
}

/// Pulls the arm of minimal normalized index for the imposed user.
pub fn step_imed_gs2(view: &EmpiricalView, user: usize) -> Decision {
    let arm = argmin_by(view.n_arms(), |a| view.normalized_index(a, user));
    Decision::pull(arm, None, exploit_or_explore(view, arm, user))
}

/// Target user for an exploration of `arm` triggered by `(arm, user)`:
/// either the least-pulled user (forced round) or the tracking argmax.
enum ExplorationTarget {
    Forced(usize),
    Track { user: usize, margin: f64 },
}

fn exploration_target(
    view: &EmpiricalView,
    state: &mut PolicyState,
    arm: usize,
    user: usize,
    rhs: &[f64],
    scaled_index: impl Fn(usize) -> f64,
) -> Result<ExplorationTarget, LpError> {
    let nb = view.n_users();
    let target = if state.counters[arm] == state.counters_plus[arm] {
        state.counters_plus[arm] *= 2;
        state.forced_rounds[arm] += 1;
        let least = argmin_by(nb, |b| view.count(arm, b) as f64);
        ExplorationTarget::Forced(least)
    } else {
        let instance = lp::build_empirical_instance(
            &view.mu_hat,
            &view.mu_hat_star,
            view.counts(),
            view.weights(),
            arm,
            rhs,
        );
        let solution = lp::solve_empirical(&instance)?;
        state.lp_solves += 1;
        let scale = (0..nb).map(&scaled_index).fold(f64::INFINITY, f64::min);
        let mut best: Option<(usize, f64)> = None;
        for b in 0..nb {
            if b != user && !view.in_info_set(arm, user, b) {
                continue;
            }
            let n_opt = solution.allocation_for(b);
            let target = if n_opt == 0.0 { 0.0 } else { n_opt * scale };
            let margin = target - view.count(arm, b) as f64;
            if best.is_none_or(|(_, m)| margin > m) {
                best = Some((b, margin));
            }
        }
        let (user, margin) = best.expect("candidate set contains the selected user");
        ExplorationTarget::Track { user, margin }
    };
    state.counters[arm] += 1;
    Ok(target)
}

/// Index argmin, exploited if empirically optimal; otherwise the arm is
/// explored at the least-pulled user (when `c_a = c+_a`) or at the user
/// lagging most behind the LP targets `n_opt * min_b' I[a][b']`.
pub fn step_imed_gs_star(
    view: &EmpiricalView,
    state: &mut PolicyState,
) -> Result<Decision, LpError> {
    let (arm, user) = global_argmin(view, |a, b| view.index(a, b));
    let phase = exploit_or_explore(view, arm, user);
    if phase != Phase::Explore {
        return Ok(Decision {
            selected: Some((arm, user)),
            ..Decision::pull(arm, Some(user), phase)
        });
    }
    let ones = vec![1.0; view.n_users()];
    let target = exploration_target(view, state, arm, user, &ones, |b| view.index(arm, b))?;
    Ok(match target {
        ExplorationTarget::Forced(b) => Decision {
            selected: Some((arm, user)),
            ..Decision::pull(arm, Some(b), Phase::ExploreForced)
        },
        ExplorationTarget::Track { user: b, margin } => Decision {
            arm,
            user: Some(b),
            phase: Phase::ExploreTrack,
            selected: Some((arm, user)),
            tracking_margin: Some(margin),
        },
    })
}

/// Uncontrolled tracking strategy with delayed exploration.
///
/// If the imposed user's best arm is empirically optimal it is exploited.
/// Otherwise the global normalized-index argmin may schedule an exploration
/// by writing an arm into `FE(b)` (forced) or `E(b)` (tracking) of the
/// target user, and the pull for the imposed user takes, in order, its
/// `FE` register, its `E` register, or its own best arm.
pub fn step_imed_gs_star2(
    view: &EmpiricalView,
    state: &mut PolicyState,
    incoming: usize,
) -> Result<Decision, LpError> {
    let own = argmin_by(view.n_arms(), |a| view.normalized_index(a, incoming));
    let phase = exploit_or_explore(view, own, incoming);
    if phase != Phase::Explore {
        return Ok(Decision::pull(own, None, phase));
    }
    let (arm, user) = global_argmin(view, |a, b| view.normalized_index(a, b));
    let mut selected = None;
    let mut tracking_margin = None;
    if view.count(arm, user) > 0 && !view.is_optimal(arm, user) {
        selected = Some((arm, user));
        let rhs = view.beta_hat.clone();
        let target = exploration_target(view, state, arm, user, &rhs, |b| {
            view.normalized_index(arm, b)
        })?;
        let (register, b) = match target {
            ExplorationTarget::Forced(b) => (&mut state.forced_register, b),
            ExplorationTarget::Track { user: b, margin } => {
                tracking_margin = Some(margin);
                (&mut state.explore_register, b)
            }
        };
        if register[b].replace(arm).is_some() {
            state.register_overwrites += 1;
        }
    }
    let (arm, phase) = if let Some(a) = state.forced_register[incoming].take() {
        (a, Phase::DelayedForced)
    } else if let Some(a) = state.explore_register[incoming].take() {
        (a, Phase::DelayedTrack)
    } else {
        (own, Phase::Explore)
    };
    Ok(Decision {
        arm,
        user: None,
        phase,
        selected,
        tracking_margin,
    })
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy {0} needs an imposed user")]
    MissingUser(PolicyKind),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Dispatches to the step function of `kind`. `incoming` is the imposed
/// user; controlled strategies ignore it.
pub fn decide(
    kind: PolicyKind,
    view: &EmpiricalView,
    state: &mut PolicyState,
    incoming: Option<usize>,
) -> Result<Decision, PolicyError> {
    let user = || incoming.ok_or(PolicyError::MissingUser(kind));
    Ok(match kind {
        PolicyKind::Imed => step_imed(view, user()?),
        PolicyKind::ImedGs => step_imed_gs(view),
        PolicyKind::ImedGsStar => step_imed_gs_star(view, state)?,
        PolicyKind::ImedGs2 => step_imed_gs2(view, user()?),
        PolicyKind::ImedGsStar2 => step_imed_gs_star2(view, state, user()?)?,
    })
}

/// Tolerance for the floating-point step invariants.
pub const INVARIANT_TOLERANCE: f64 = 1e-9;

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + INVARIANT_TOLERANCE * rhs.abs().max(1.0)
}

/// Checks the per-step guarantees of `kind` for the couple about to be
/// pulled. `view` describes time `t` (before the pull) and `state` holds the
/// counters after the decision.
pub fn check_step(
    kind: PolicyKind,
    view: &EmpiricalView,
    state: &PolicyState,
    decision: &Decision,
    pulled: (usize, usize),
) -> Result<(), String> {
    let (na, nb) = (view.n_arms(), view.n_users());
    let total: u64 = state.counts.iter().sum();
    if total != state.t {
        return Err(format!("sum of counts {total} != t = {}", state.t));
    }
    for (i, (&n, &s)) in state.counts.iter().zip(&state.reward_sums).enumerate() {
        if s < 0.0 || s > n as f64 {
            return Err(format!(
                "reward sum {s} outside [0, {n}] at couple ({}, {})",
                i / nb,
                i % nb
            ));
        }
    }

    let pulled_n = view.count(pulled.0, pulled.1);
    let log_pulled = (pulled_n as f64).ln();
    let lower_bound = |arms: &mut dyn Iterator<Item = (usize, usize)>,
                       index: &dyn Fn(usize, usize) -> f64|
     -> Result<(), String> {
        if pulled_n == 0 {
            // initial pull, ln 0 = -inf bounds nothing
            return Ok(());
        }
        for (a, b) in arms {
            if view.count(a, b) == 0 {
                return Err(format!(
                    "pulled couple {pulled:?} while ({a}, {b}) was never pulled"
                ));
            }
            if view.is_optimal(a, b) {
                if pulled_n > view.count(a, b) {
                    return Err(format!(
                        "empirical lower bound: N of pulled couple {pulled:?} = {pulled_n} exceeds N[{a}][{b}] = {} of an optimal couple",
                        view.count(a, b)
                    ));
                }
            } else if !le(log_pulled, index(a, b)) {
                return Err(format!(
                    "empirical lower bound: ln N of pulled couple {pulled:?} = {log_pulled} exceeds index {} of ({a}, {b})",
                    index(a, b)
                ));
            }
        }
        Ok(())
    };
    match kind {
        PolicyKind::ImedGs | PolicyKind::ImedGsStar => {
            let mut all = (0..na).flat_map(|a| (0..nb).map(move |b| (a, b)));
            lower_bound(&mut all, &|a, b| view.index(a, b))?;
        }
        PolicyKind::Imed => {
            let mut column = (0..na).map(|a| (a, pulled.1));
            lower_bound(&mut column, &|a, b| view.agnostic_index(a, b))?;
        }
        PolicyKind::ImedGs2 => {
            let mut column = (0..na).map(|a| (a, pulled.1));
            lower_bound(&mut column, &|a, b| view.index(a, b))?;
        }
        PolicyKind::ImedGsStar2 => {}
    }

    let explored = match kind {
        PolicyKind::ImedGs => decision.phase == Phase::Explore,
        PolicyKind::ImedGsStar => {
            matches!(decision.phase, Phase::ExploreForced | Phase::ExploreTrack)
        }
        _ => false,
    };
    if explored {
        let (a, b) = decision.selected.expect("exploration has a selected couple");
        let cost = view.transport_cost(a, b);
        let cap = (view.user_counts[b] as f64).ln();
        if !le(cost, cap) {
            return Err(format!(
                "empirical upper bound: transport cost {cost} of ({a}, {b}) exceeds ln N_b = {cap}"
            ));
        }
    }

    if let Some(margin) = decision.tracking_margin {
        if margin < -INVARIANT_TOLERANCE {
            return Err(format!("N^opt does not dominate N: best margin {margin}"));
        }
    }

    if matches!(kind, PolicyKind::ImedGsStar | PolicyKind::ImedGsStar2) {
        check_counters(state)?;
    }
    Ok(())
}

/// `c+_a = 2^forced_a`, `c_a <= c+_a` and `forced_a <= 2 + log2(c_a)`.
pub fn check_counters(state: &PolicyState) -> Result<(), String> {
    for a in 0..state.n_arms {
        let (c, cp, k) = (
            state.counters[a],
            state.counters_plus[a],
            state.forced_rounds[a],
        );
        if k >= 64 || cp != 1u64 << k {
            return Err(format!(
                "arm {a}: c+ = {cp} but {k} forced rounds were recorded"
            ));
        }
        if c > cp {
            return Err(format!("arm {a}: c = {c} exceeds c+ = {cp}"));
        }
        if k as f64 > 2.0 + (c as f64).log2() {
            return Err(format!(
                "arm {a}: {k} forced rounds exceed 2 + log2(c) with c = {c}"
            ));
        }
    }
    Ok(())
}
