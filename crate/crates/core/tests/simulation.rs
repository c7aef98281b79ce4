use approx::assert_abs_diff_eq;
use gbl_core::graph::{derive, WeightMatrix};
use gbl_core::policy::{
    step_imed_gs_star2, EmpiricalView, Phase, PolicyKind, PolicyState,
};
use gbl_core::sim::{
    batch, log_frequency_estimate, pareto_statistic, pseudo_regret, run, write_aggregate_csv,
    write_trace_csv, BatchSpec, ConfigSource, Environment, RunOptions, UserSequence,
    WeightSource,
};
use gbl_core::{fixed_config, BanditConfig};

fn users_for(policy: PolicyKind) -> UserSequence {
    if policy.chooses_user() {
        UserSequence::PolicyChosen
    } else {
        UserSequence::RoundRobin
    }
}

#[test]
fn initialization_pulls_every_couple_once() {
    let c = fixed_config();
    let tr = run(&c, PolicyKind::ImedGs, &UserSequence::PolicyChosen, 50, 7, &RunOptions::default())
        .unwrap();
    assert!(tr.final_state.counts.iter().all(|&n| n == 1));
    assert_eq!(tr.phase_count(Phase::Initial), 50);
}

#[test]
fn environment_marginals() {
    let c = fixed_config();
    for (a, b) in [(0, 0), (1, 4), (3, 8), (4, 2)] {
        let mut env = Environment::new(&c, 1234 + a as u64);
        let n = 100_000;
        let total: f64 = (0..n).map(|_| env.pull(a, b)).sum();
        assert!(
            (total / n as f64 - c.mean(a, b)).abs() < 0.01,
            "couple ({a}, {b})"
        );
    }
}

#[test]
fn runs_are_deterministic() {
    let c = fixed_config();
    for policy in PolicyKind::ALL {
        let users = users_for(policy);
        let opts = RunOptions::default();
        let a = run(&c, policy, &users, 2000, 99, &opts).unwrap();
        let b = run(&c, policy, &users, 2000, 99, &opts).unwrap();
        assert_eq!(a.points, b.points, "{policy}");
        assert_eq!(a.final_state, b.final_state, "{policy}");
    }
}

#[test]
fn pseudo_regret_matches_final_counts() {
    let c = fixed_config();
    let d = derive(&c);
    let tr = run(&c, PolicyKind::ImedGsStar, &UserSequence::PolicyChosen, 3000, 5, &RunOptions::default())
        .unwrap();
    let direct: f64 = (0..5)
        .flat_map(|a| (0..10).map(move |b| (a, b)))
        .map(|(a, b)| d.gap(a, b) * tr.final_state.count(a, b) as f64)
        .sum();
    assert_eq!(tr.final_point().pseudo_regret, direct);
    assert_eq!(pseudo_regret(&tr.final_state, &d), direct);
    assert!(tr
        .points
        .windows(2)
        .all(|w| w[0].pseudo_regret <= w[1].pseudo_regret));
}

#[test]
fn thinned_trace_is_a_subsequence() {
    let c = fixed_config();
    let full = RunOptions {
        thinning: 1.0,
        ..RunOptions::default()
    };
    let a = run(&c, PolicyKind::ImedGs2, &UserSequence::RoundRobin, 1500, 3, &full).unwrap();
    let b = run(&c, PolicyKind::ImedGs2, &UserSequence::RoundRobin, 1500, 3, &RunOptions::default())
        .unwrap();
    assert_eq!(a.points.len(), 1500);
    for p in &b.points {
        assert_eq!(&a.points[p.t as usize - 1], p);
    }
}

#[test]
fn round_robin_log_frequencies() {
    let c = fixed_config();
    let tr = run(&c, PolicyKind::Imed, &UserSequence::RoundRobin, 700, 1, &RunOptions::default())
        .unwrap();
    let expected = 70f64.ln() / 700f64.ln();
    for f in log_frequency_estimate(&tr.final_state) {
        assert_abs_diff_eq!(f, expected, epsilon = 1e-15);
    }
    let single = BanditConfig::new(&[vec![0.4], vec![0.6]], WeightMatrix::ones(1)).unwrap();
    let tr = run(&single, PolicyKind::Imed, &UserSequence::RoundRobin, 100, 1, &RunOptions::default())
        .unwrap();
    assert_eq!(log_frequency_estimate(&tr.final_state), vec![1.0]);
}

#[test]
fn pareto_statistic_special_cases() {
    let c = fixed_config();
    let d = derive(&c);
    // only optimal couples pulled
    let mut s = PolicyState::new(5, 10);
    for b in 0..10 {
        for _ in 0..5 {
            s.record(4, b, 1.0);
        }
    }
    let stat = pareto_statistic(&s, &c, &d);
    assert_eq!(stat[4], None);
    assert!(stat[..4].iter().all(|v| *v == Some(0.0)));

    let single = BanditConfig::new(&[vec![0.5], vec![0.75]], WeightMatrix::ones(1)).unwrap();
    let ds = derive(&single);
    let mut s = PolicyState::new(2, 1);
    for _ in 0..10 {
        s.record(0, 0, 0.0);
    }
    for _ in 0..90 {
        s.record(1, 0, 1.0);
    }
    let expected = 10.0 * 0.5 * (4.0f64 / 3.0).ln() / 100f64.ln();
    assert_abs_diff_eq!(pareto_statistic(&s, &single, &ds)[0].unwrap(), expected, epsilon = 1e-12);
}

fn state_with(counts: [[u64; 2]; 2], sums: [[f64; 2]; 2]) -> PolicyState {
    let mut s = PolicyState::new(2, 2);
    s.counts = counts.concat();
    s.reward_sums = sums.concat();
    s.t = s.counts.iter().sum();
    s
}

#[test]
fn register_written_for_another_user_is_consumed_on_arrival() {
    let w = WeightMatrix::ones(2);
    let mut s = state_with([[30, 40], [3, 2]], [[24.0, 24.0], [1.5, 1.0]]);
    let v = EmpiricalView::new(&s, &w);
    let d = step_imed_gs_star2(&v, &mut s, 0).unwrap();
    assert_eq!(d.selected, Some((1, 1)));
    assert_eq!((d.arm, d.phase), (1, Phase::Explore));
    assert_eq!(s.forced_register, vec![None, Some(1)]);
    s.record(1, 0, 0.0);

    let v = EmpiricalView::new(&s, &w);
    let d = step_imed_gs_star2(&v, &mut s, 1).unwrap();
    assert_eq!((d.arm, d.phase), (1, Phase::DelayedForced));
    assert_eq!(s.forced_register[1], None);
}

fn small_batch(threads: usize) -> Vec<u8> {
    let spec = BatchSpec {
        source: ConfigSource::Random {
            n_arms: 3,
            n_users: 4,
            weights: WeightSource::Random,
        },
        policies: vec![PolicyKind::Imed, PolicyKind::ImedGsStar],
        users: UserSequence::PolicyChosen,
        horizon: 500,
        n_runs: 6,
        master_seed: 77,
        options: RunOptions::default(),
        threads: Some(threads),
    };
    let res = batch(&spec).unwrap();
    let mut out = Vec::new();
    write_aggregate_csv(&mut out, &res.aggregate()).unwrap();
    write_trace_csv(&mut out, &res).unwrap();
    out
}

#[test]
fn batch_output_independent_of_thread_count() {
    let one = small_batch(1);
    assert_eq!(one, small_batch(3));
    let text = String::from_utf8(one).unwrap();
    assert!(text.starts_with("t,policy,mean_regret,std_regret,n_runs\n"));
    assert!(text.contains("t,policy,run,pseudo_regret,min_Nb,pareto_max_over_arms\n"));
}

#[test]
fn single_run_batch_equals_the_run() {
    let c = fixed_config();
    let spec = BatchSpec {
        source: ConfigSource::Fixed(c.clone()),
        policies: vec![PolicyKind::ImedGs],
        users: UserSequence::PolicyChosen,
        horizon: 300,
        n_runs: 1,
        master_seed: 4,
        options: RunOptions::default(),
        threads: None,
    };
    let res = batch(&spec).unwrap();
    let tr = run(&c, PolicyKind::ImedGs, &UserSequence::PolicyChosen, 300, 4, &RunOptions::default())
        .unwrap();
    let agg = res.aggregate();
    assert_eq!(agg.len(), tr.points.len());
    for (row, p) in agg.iter().zip(&tr.points) {
        assert_eq!((row.t, row.mean, row.std, row.n_runs), (p.t, p.pseudo_regret, 0.0, 1));
    }
}
