//! Dense two-phase primal simplex for `min c.x  s.t.  A x >= b, x >= 0`.
//!
//! Entering columns follow the largest-reduced-cost rule with ties going to
//! the first column in pivot order. After the first degenerate (zero-step)
//! pivot the solver switches to Bland's rule for the rest of the solve,
//! which rules out cycling. Leaving rows are chosen by the minimum ratio
//! test, ties going to the basic variable that comes first in pivot order.

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const PHASE_ONE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimplexError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
    #[error("dimension mismatch in linear program")]
    Dimension,
}

/// Order in which structural columns are scanned for entering candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotOrder {
    #[default]
    Forward,
    Reverse,
}

#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Dual values of the `>=` rows (nonnegative at optimality).
    pub duals: Vec<f64>,
    /// Whether a zero-step pivot happened and Bland's rule took over.
    pub degenerate: bool,
    pub pivots: usize,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// Position of each column in the scan order (lower is earlier).
    rank: Vec<usize>,
    degenerate: bool,
    pivots: usize,
    limit: usize,
}

impl Tableau {
    fn reduced_costs(&self, cost: &[f64], allowed: usize) -> Vec<f64> {
        let mut d = cost[..allowed].to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * row[j];
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][col];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rows[i][col] = 0.0;
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Runs simplex iterations minimizing `cost` over the first `allowed` columns.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<(), SimplexError> {
        let mut bland = self.degenerate;
        loop {
            if self.pivots > self.limit {
                return Err(SimplexError::IterationLimit(self.limit));
            }
            let d = self.reduced_costs(cost, allowed);
            let mut entering: Option<usize> = None;
            for j in 0..allowed {
                if d[j] >= -COST_EPS || self.basis.contains(&j) {
                    continue;
                }
                entering = match entering {
                    None => Some(j),
                    Some(e) => {
                        let better = if bland {
                            self.rank[j] < self.rank[e]
                        } else {
                            d[j] < d[e] || (d[j] == d[e] && self.rank[j] < self.rank[e])
                        };
                        Some(if better { j } else { e })
                    }
                };
            }
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs[i].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                            if (ratio < best && !tie)
                                || (tie && self.rank[self.basis[i]] < self.rank[self.basis[r]])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((r, step)) = leave else {
                return Err(SimplexError::Unbounded);
            };
            if step <= 1e-14 {
                self.degenerate = true;
                bland = true;
            }
            self.pivot(r, col);
        }
    }
}

/// Solves `min c.x  s.t.  A x >= b, x >= 0`.
pub fn minimize_ge(
    c: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
    order: PivotOrder,
) -> Result<SimplexOutcome, SimplexError> {
    let n = c.len();
    let m = a.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(SimplexError::Dimension);
    }
    if m == 0 {
        if c.iter().any(|&cj| cj < 0.0) {
            return Err(SimplexError::Unbounded);
        }
        return Ok(SimplexOutcome {
            x: vec![0.0; n],
            objective: 0.0,
            duals: Vec::new(),
            degenerate: false,
            pivots: 0,
        });
    }

    // Columns: structural [0, n), surplus [n, n+m), artificial [n+m, n+2m).
    let total = n + 2 * m;
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; total];
        let flip = b[i] < 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * a[i][j];
        }
        row[n + i] = -sign;
        if flip {
            // the surplus column is +e_i after the flip and can start basic
            basis.push(n + i);
        } else {
            row[n + m + i] = 1.0;
            basis.push(n + m + i);
        }
        rows.push(row);
        rhs.push(sign * b[i]);
    }
    let mut rank: Vec<usize> = (0..total).collect();
    if order == PivotOrder::Reverse {
        for j in 0..n {
            rank[j] = n - 1 - j;
        }
    }
    let mut tab = Tableau {
        rows,
        rhs,
        basis,
        rank,
        degenerate: false,
        pivots: 0,
        limit: 50 * (n + m) + 1000,
    };

    let mut phase_one = vec![0.0; total];
    for v in phase_one.iter_mut().skip(n + m) {
        *v = 1.0;
    }
    tab.optimize(&phase_one, total)?;
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(&tab.rhs)
        .filter(|(&j, _)| j >= n + m)
        .map(|(_, &v)| v)
        .sum();
    if infeasibility > PHASE_ONE_EPS {
        return Err(SimplexError::Infeasible);
    }
    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n + m {
            let replacement = (0..n + m)
                .filter(|j| !tab.basis.contains(j))
                .find(|&j| tab.rows[i][j].abs() > PIVOT_EPS);
            match replacement {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.rows.remove(i);
                    tab.rhs.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut cost = vec![0.0; total];
    cost[..n].copy_from_slice(c);
    tab.optimize(&cost, n + m)?;

    let mut x = vec![0.0; n];
    for (i, &j) in tab.basis.iter().enumerate() {
        if j < n {
            x[j] = tab.rhs[i].max(0.0);
        }
    }
    let d = tab.reduced_costs(&cost, n + m);
    let duals = (0..m).map(|i| d[n + i].max(0.0)).collect();
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(SimplexOutcome {
        x,
        objective,
        duals,
        degenerate: tab.degenerate,
        pivots: tab.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_constraints_bind_independently() {
        let c = [2.0, 3.0];
        let a = vec![vec![4.0, 0.0], vec![0.0, 0.5]];
        let b = [1.0, 2.0];
        let out = minimize_ge(&c, &a, &b, PivotOrder::Forward).unwrap();
        assert_abs_diff_eq!(out.x[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(out.x[1], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.objective, 12.5, epsilon = 1e-12);
        // duals: y_i = c_i / a_ii
        assert_abs_diff_eq!(out.duals[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.duals[1], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn shared_variable_covers_two_rows() {
        // x0 + x2 >= 1, x1 + x2 >= 1; x2 costs less than x0 + x1
        let c = [1.0, 1.0, 1.5];
        let a = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]];
        let out = minimize_ge(&c, &a, &[1.0, 1.0], PivotOrder::Forward).unwrap();
        assert_abs_diff_eq!(out.objective, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.x[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_rows_terminate() {
        // duplicated constraint makes phase one degenerate
        let c = [1.0, 1.0];
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        let out = minimize_ge(&c, &a, &[1.0, 1.0, 2.0], PivotOrder::Forward).unwrap();
        assert_abs_diff_eq!(out.objective, 1.0, epsilon = 1e-12);
        let rev = minimize_ge(&c, &a, &[1.0, 1.0, 2.0], PivotOrder::Reverse).unwrap();
        assert_abs_diff_eq!(rev.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = vec![vec![0.0, 0.0]];
        assert_eq!(
            minimize_ge(&[1.0, 1.0], &a, &[1.0], PivotOrder::Forward).unwrap_err(),
            SimplexError::Infeasible
        );
        let a = vec![vec![1.0, 0.0]];
        assert_eq!(
            minimize_ge(&[1.0, -1.0], &a, &[1.0], PivotOrder::Forward).unwrap_err(),
            SimplexError::Unbounded
        );
    }

    #[test]
    fn empty_constraint_set() {
        let out = minimize_ge(&[1.0, 2.0], &[], &[], PivotOrder::Forward).unwrap();
        assert_eq!(out.x, vec![0.0, 0.0]);
        assert_eq!(out.objective, 0.0);
    }
}
