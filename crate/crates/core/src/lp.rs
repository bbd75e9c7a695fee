//! Dense two-phase simplex with Bland's rule, for `min c·x, A x = b, x ≥ 0`.
//!
//! Sized for the few hundred variables of a desk-scale flow polytope. The
//! constraint matrices used in this crate are network matrices with entries
//! in `{−1, 0, 1}`, so pivots stay well conditioned.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;

pub(crate) struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (a, b) in row.iter_mut().zip(&pivot_row) {
                        *a -= f * b;
                    }
                    row[c] = 0.0;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost` over the current basis; `allowed` masks entering columns.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        let m = self.rows.len();
        let cap = 50 * (self.width + m) + 1000;
        for _ in 0..cap {
            // reduced costs c_j − c_B B⁻¹ A_j
            let entering = (0..self.width).filter(|&j| allowed(j)).find(|&j| {
                let z: f64 = (0..m).map(|i| cost[self.basis[i]] * self.rows[i][j]).sum();
                cost[j] - z < -1e-10
            });
            let Some(c) = entering else { return Ok(()) };
            let mut best: Option<(f64, usize)> = None;
            for i in 0..m {
                let a = self.rows[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.rows[i][self.width] / a;
                    let better = match best {
                        None => true,
                        Some((r, bi)) => ratio < r - 1e-13 || (ratio <= r + 1e-13 && self.basis[i] < self.basis[bi]),
                    };
                    if better {
                        best = Some((ratio, i));
                    }
                }
            }
            let Some((_, r)) = best else {
                return Err(Error::Internal("linear program is unbounded".into()));
            };
            self.pivot(r, c);
        }
        Err(Error::Internal("simplex iteration limit reached".into()))
    }
}

/// `None` when the program is infeasible.
pub(crate) fn minimize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<Option<LpSolution>> {
    let m = a.len();
    let n = c.len();
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width + 1];
        for j in 0..n {
            row[j] = sign * a[i][j];
        }
        row[n + i] = 1.0;
        row[width] = sign * b[i];
        rows.push(row);
    }
    let mut t = Tableau { rows, basis: (n..n + m).collect(), width };

    let phase_one: Vec<f64> = (0..width).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    t.optimize(&phase_one, &|_| true)?;
    let infeasibility: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.rows[i][width]).sum();
    if infeasibility > 1e-9 {
        return Ok(None);
    }
    // Drive artificial variables out of the basis; rows that cannot be
    // pivoted are redundant and dropped.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > PIVOT_EPS) {
                Some(j) => {
                    t.pivot(i, j);
                    i += 1;
                }
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, m));
    t.optimize(&cost, &|j| j < n)?;
    let mut x = vec![0.0; n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            x[bv] = t.rows[i][width].max(0.0);
        }
    }
    let value = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Ok(Some(LpSolution { value, x }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_transportation_problem() {
        // x00 + x01 = 0.5, x10 + x11 = 0.5, x00 + x10 = 0.25, x01 + x11 = 0.75
        let a = vec![
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
        ];
        let b = vec![0.5, 0.5, 0.25, 0.75];
        let c = vec![0.0, 1.0, 1.0, 0.0];
        let sol = minimize(&a, &b, &c).unwrap().unwrap();
        assert!((sol.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn infeasible_program() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let sol = minimize(&a, &[1.0, 2.0], &[1.0, 1.0]).unwrap();
        assert!(sol.is_none());
    }

    #[test]
    fn negative_costs_pick_a_vertex() {
        let a = vec![vec![1.0, 1.0, 1.0]];
        let sol = minimize(&a, &[1.0], &[0.5, -2.0, -1.0]).unwrap().unwrap();
        assert_eq!(sol.x, vec![0.0, 1.0, 0.0]);
    }
}
