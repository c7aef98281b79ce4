mod support;

use approx::assert_abs_diff_eq;
use gbl_core::graph::{check_membership, derive, WeightMatrix};
use gbl_core::lp::{
    self, agnostic_constant, build_empirical_instance, build_instance, c_star, ratio_curve,
    solve, solve_all, DropReason, LpStatus, PivotOrder, CERTIFICATE_TOLERANCE,
    FEASIBILITY_TOLERANCE,
};
use gbl_core::{fixed_config, BanditConfig};
use support::{finite_rows, joint_lp, random_config, vertex_enumeration};

#[test]
fn fixed_config_constants() {
    let c = fixed_config();
    let ones = vec![1.0; 10];
    let structured = c_star(&c, &ones).unwrap();
    let agnostic = agnostic_constant(&c, &ones).unwrap();
    assert_abs_diff_eq!(structured, 7.263567182836703, epsilon = 1e-9);
    assert_abs_diff_eq!(agnostic, 18.618835463342947, epsilon = 1e-9);
    assert!(structured < agnostic);

    let sols = solve_all(&c, &ones).unwrap();
    let objectives: Vec<f64> = sols.iter().map(|s| s.objective).collect();
    for (got, want) in objectives.iter().zip([0.83407, 4.98585, 0.73786, 0.70579]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
    }
    // mu*_{b3} = 1, so every arm's b3 row has an infinite coefficient
    for s in &sols {
        assert_eq!(s.status, LpStatus::RowsDropped);
        assert!(s.dropped.contains(&(2, DropReason::InfiniteCoefficient)));
        assert!(s.feasibility_residual <= FEASIBILITY_TOLERANCE);
        assert!(s.certificate_residual <= CERTIFICATE_TOLERANCE);
    }
}

#[test]
fn fixed_config_per_arm_matches_vertex_oracle() {
    let c = fixed_config();
    for inst in build_instance(&c, &[1.0; 10]) {
        let (a, b) = finite_rows(&inst);
        let (want, _) = vertex_enumeration(&inst.objective, &a, &b).unwrap();
        let got = solve(&inst).unwrap().objective;
        assert_abs_diff_eq!(got, want, epsilon = 1e-8);
    }
}

#[test]
fn beta_linearity() {
    let c = fixed_config();
    let one = agnostic_constant(&c, &[1.0; 10]).unwrap();
    let half = agnostic_constant(&c, &[0.5; 10]).unwrap();
    assert_abs_diff_eq!(half, 0.5 * one, epsilon = 1e-12);
    let s1 = c_star(&c, &[1.0; 10]).unwrap();
    let s2 = c_star(&c, &[0.5; 10]).unwrap();
    assert_abs_diff_eq!(s2, 0.5 * s1, epsilon = 1e-9);
}

#[test]
fn per_arm_decomposition_matches_joint_oracle() {
    for seed in 0..60u64 {
        let n_arms = 2 + (seed % 2) as usize;
        let n_users = 2 + (seed % 2) as usize;
        let c = random_config(n_arms, n_users, seed);
        let beta = vec![1.0; n_users];
        let (obj, a, b) = joint_lp(&c, &beta);
        let (want, _) = vertex_enumeration(&obj, &a, &b).unwrap();
        let got = c_star(&c, &beta).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-8);
    }
}

#[test]
fn agnostic_equals_lp_under_vacuous_weights() {
    for seed in 0..100u64 {
        let c = random_config(4, 5, seed)
            .with_weights(WeightMatrix::ones(5))
            .unwrap();
        let beta: Vec<f64> = (0..5).map(|b| 0.5 + 0.1 * b as f64).collect();
        assert_abs_diff_eq!(
            c_star(&c, &beta).unwrap(),
            agnostic_constant(&c, &beta).unwrap(),
            epsilon = 1e-9
        );
    }
}

#[test]
fn larger_weights_never_lower_the_constant() {
    for seed in 0..50u64 {
        let c = random_config(3, 5, seed);
        let w = c.weights();
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|b| {
                (0..5)
                    .map(|b2| if b == b2 { 0.0 } else { 0.5 * (w.get(b, b2) + 1.0) })
                    .collect()
            })
            .collect();
        let looser = c.with_weights(WeightMatrix::from_rows(&rows).unwrap()).unwrap();
        assert!(check_membership(&looser, false).is_member());
        let ones = vec![1.0; 5];
        let tight = c_star(&c, &ones).unwrap();
        let loose = c_star(&looser, &ones).unwrap();
        assert!(loose >= tight - 1e-9, "seed {seed}: {loose} < {tight}");
    }
}

#[test]
fn pivot_order_does_not_change_the_optimum() {
    for seed in 0..40u64 {
        let c = random_config(3, 4, seed);
        for inst in build_instance(&c, &[1.0; 4]) {
            let f = lp::solve_with(&inst, PivotOrder::Forward).unwrap();
            let r = lp::solve_with(&inst, PivotOrder::Reverse).unwrap();
            assert_abs_diff_eq!(f.objective, r.objective, epsilon = 1e-9);
        }
    }
}

#[test]
fn empirical_instance_with_true_means_is_the_true_instance() {
    let c = fixed_config();
    let d = derive(&c);
    let mu: Vec<f64> = (0..5).flat_map(|a| c.arm_row(a).to_vec()).collect();
    let counts = vec![1u64; 50];
    let ones = vec![1.0; 10];
    let truth = build_instance(&c, &ones);
    for inst in &truth {
        let emp = build_empirical_instance(&mu, &d.mu_star, &counts, c.weights(), inst.arm, &ones);
        assert_eq!(&emp, inst);
        assert_eq!(solve(&emp).unwrap(), solve(inst).unwrap());
    }
}

#[test]
fn empty_empirical_rows_give_zero_allocation() {
    let w = WeightMatrix::uniform(2, 0.3);
    // arm 1 never pulled: empirical mean 0 but no informative user
    let mu = vec![0.6, 0.5, 0.0, 0.0];
    let counts = vec![4, 4, 0, 0];
    let inst = build_empirical_instance(&mu, &[0.6, 0.5], &counts, &w, 1, &[1.0, 1.0]);
    let sol = solve(&inst).unwrap();
    assert_eq!(sol.objective, 0.0);
    assert!(sol.allocation.iter().all(|&x| x == 0.0));
    assert_eq!(sol.dropped.len(), 2);
}

#[test]
fn identical_users_collapse_at_alpha_zero() {
    let w = WeightMatrix::uniform(2, 0.0);
    let c = BanditConfig::new(&[vec![0.5, 0.5], vec![0.75, 0.75]], w).unwrap();
    let ones = [1.0, 1.0];
    let ratio = c_star(&c, &ones).unwrap() / agnostic_constant(&c, &ones).unwrap();
    assert_abs_diff_eq!(ratio, 0.5, epsilon = 1e-12);

    let curve = ratio_curve(&[0.0, 1.0], 3, 2, 30, 5).unwrap();
    assert_abs_diff_eq!(curve[0].mean, 0.5, epsilon = 1e-9);
    assert_eq!(curve[1].mean, 1.0);
    assert_eq!(curve[1].std_error, 0.0);
}

#[test]
fn ratio_curve_is_deterministic_per_alpha() {
    let a = ratio_curve(&[0.2, 0.6], 3, 4, 10, 9).unwrap();
    let b = ratio_curve(&[0.6], 3, 4, 10, 9).unwrap();
    assert_eq!(a[1], b[0]);
}
