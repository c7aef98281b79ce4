//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use gbl_core::graph::{sample_config, sample_weights, BanditConfig};
use gbl_core::kl::kl_plus;
use gbl_core::lp::LpInstance;

/// Solves the square system `m x = r` by Gaussian elimination with partial
/// pivoting; `None` if it is (numerically) singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for k in col..n {
                        m[row][k] -= f * m[col][k];
                    }
                    r[row] -= f * r[col];
                }
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Minimum of `c.x` over `{x >= 0, a x >= b}` by enumerating every basic
/// solution. Assumes the minimum is attained (bounded and feasible);
/// returns `None` if no vertex is feasible.
pub fn vertex_enumeration(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    if n == 0 {
        return Some((0.0, Vec::new()));
    }
    // constraints: rows of a, then the n nonnegativity constraints
    let total = a.len() + n;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for active in combinations(total, n) {
        let mut m = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for &i in &active {
            if i < a.len() {
                m.push(a[i].clone());
                r.push(b[i]);
            } else {
                let mut e = vec![0.0; n];
                e[i - a.len()] = 1.0;
                m.push(e);
                r.push(0.0);
            }
        }
        let Some(x) = solve_square(m, r) else { continue };
        let scale = x.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        let tol = 1e-9 * scale;
        if x.iter().any(|&v| v < -tol) {
            continue;
        }
        let feasible = a.iter().zip(b).all(|(row, &rhs)| {
            let lhs: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            lhs >= rhs - 1e-9 * rhs.abs().max(1.0) * scale
        });
        if !feasible {
            continue;
        }
        let obj: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, x));
        }
    }
    best
}

/// Retained rows of an instance as a dense finite matrix.
pub fn finite_rows(instance: &LpInstance) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (kept, _) = instance.partition_rows();
    let a = kept
        .iter()
        .map(|r| r.coeffs.iter().map(|c| c.value()).collect())
        .collect();
    let b = kept.iter().map(|r| r.rhs).collect();
    (a, b)
}

/// Joint LP over all arms at once, written from scratch: one variable per
/// couple with positive gap, one row per sub-optimal couple, rows with an
/// infinite coefficient discharged and all-zero rows dropped.
pub fn joint_lp(config: &BanditConfig, beta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let (na, nb) = (config.n_arms(), config.n_users());
    let star: Vec<f64> = (0..nb)
        .map(|b| (0..na).map(|a| config.mean(a, b)).fold(f64::MIN, f64::max))
        .collect();
    let vars: Vec<(usize, usize)> = (0..na)
        .flat_map(|a| (0..nb).map(move |b| (a, b)))
        .filter(|&(a, b)| config.mean(a, b) < star[b])
        .collect();
    let c: Vec<f64> = vars.iter().map(|&(a, b)| star[b] - config.mean(a, b)).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for &(a, b) in &vars {
        let mut row = vec![0.0; vars.len()];
        let mut discharged = false;
        for (j, &(a2, b2)) in vars.iter().enumerate() {
            if a2 != a {
                continue;
            }
            let target = star[b] - config.weights().get(b, b2);
            let k = kl_plus(config.mean(a, b2), target).unwrap();
            if k.is_infinite() {
                discharged = true;
            }
            row[j] = k.value();
        }
        if discharged || row.iter().all(|&v| v == 0.0) {
            continue;
        }
        rows.push(row);
        rhs.push(beta[b]);
    }
    (c, rows, rhs)
}

/// Seeded random configuration with a random metric.
pub fn random_config(n_arms: usize, n_users: usize, seed: u64) -> BanditConfig {
    let w = sample_weights(n_users, seed);
    sample_config(n_arms, &w, seed.wrapping_add(0x9E37)).expect("sampler succeeds")
}
