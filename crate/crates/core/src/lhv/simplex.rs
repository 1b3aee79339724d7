//! Dense phase-one simplex for small feasibility problems
//! `A x = b, x ≥ 0` with `b ≥ 0`.
//!
//! Bland's rule for both entering and leaving variables, so degenerate
//! problems cannot cycle.

const PIVOT_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Feasibility {
    Feasible(Vec<f64>),
    /// Phase-one optimum: the minimal total constraint violation.
    Infeasible(f64),
    IterationLimit,
}

/// Dense equality system, one row per constraint.
#[derive(Debug, Clone, Default)]
pub(crate) struct EqualitySystem {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl EqualitySystem {
    pub fn push(&mut self, row: Vec<f64>, rhs: f64) {
        self.rows.push(row);
        self.rhs.push(rhs);
    }
}

/// Searches for x ≥ 0 with `A x = b`. A phase-one optimum above `tol`
/// certifies infeasibility.
pub(crate) fn find_feasible(system: &EqualitySystem, tol: f64) -> Feasibility {
    let m = system.rows.len();
    let n = system.rows.first().map_or(0, Vec::len);
    let width = n + m + 1;

    let mut tableau: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (i, (row, &b)) in system.rows.iter().zip(&system.rhs).enumerate() {
        debug_assert_eq!(row.len(), n);
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; width];
        for (j, a) in row.iter().enumerate() {
            t[j] = sign * a;
        }
        t[n + i] = 1.0;
        t[width - 1] = sign * b;
        tableau.push(t);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // reduced costs for minimising the sum of artificials
    let mut cost = vec![0.0; width];
    for t in &tableau {
        for j in 0..n {
            cost[j] -= t[j];
        }
        cost[width - 1] -= t[width - 1];
    }

    for _ in 0..MAX_ITERATIONS {
        let Some(enter) = (0..n + m).find(|&j| cost[j] < -PIVOT_TOL) else {
            let objective = -cost[width - 1];
            if objective > tol {
                return Feasibility::Infeasible(objective);
            }
            let mut x = vec![0.0; n];
            for (i, &var) in basis.iter().enumerate() {
                if var < n {
                    x[var] = tableau[i][width - 1].max(0.0);
                }
            }
            return Feasibility::Feasible(x);
        };

        let mut leave: Option<(usize, f64)> = None;
        for (i, t) in tableau.iter().enumerate() {
            let a = t[enter];
            if a > PIVOT_TOL {
                let ratio = t[width - 1] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        if ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[k]) {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
        }
        // phase one is bounded below by zero, so a ray cannot occur
        let Some((p, _)) = leave else {
            return Feasibility::IterationLimit;
        };

        let pivot = tableau[p][enter];
        tableau[p].iter_mut().for_each(|v| *v /= pivot);
        let pivot_row = tableau[p].clone();
        for (i, t) in tableau.iter_mut().enumerate() {
            if i != p {
                let f = t[enter];
                if f != 0.0 {
                    t.iter_mut().zip(&pivot_row).for_each(|(v, r)| *v -= f * r);
                }
            }
        }
        let f = cost[enter];
        cost.iter_mut()
            .zip(&pivot_row)
            .for_each(|(v, r)| *v -= f * r);
        basis[p] = enter;
    }
    Feasibility::IterationLimit
}
