//! Dense two-phase primal simplex for standard-form linear programs:
//! minimize c·x subject to A x = b, x >= 0.
//!
//! Bland's rule keeps the iteration free of cycling; problems in this
//! crate stay small (tens of rows), so a dense tableau is the simplest
//! robust choice.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct StandardLp {
    /// Objective coefficients c (length n).
    pub objective: Vec<f64>,
    /// Dense constraint rows of A (each length n).
    pub rows: Vec<Vec<f64>>,
    /// Right-hand side b (length m).
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible { phase1_residual: f64 },
    Unbounded,
}

const PIVOT_EPS: f64 = 1e-11;

struct Tableau {
    /// m x (n + 1) matrix; last column is the rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        let inv = 1.0 / piv;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.rows[row].clone();
        for (r, other) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = other[col];
            if factor != 0.0 {
                for (v, p) in other.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Reduced costs for the given objective over current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.rows.len();
        let mut y = vec![0.0; m];
        for (r, &b) in self.basis.iter().enumerate() {
            y[r] = cost[b];
        }
        let mut red = cost.to_vec();
        for j in 0..self.n {
            let mut dot = 0.0;
            for r in 0..m {
                dot += y[r] * self.rows[r][j];
            }
            red[j] -= dot;
        }
        red
    }

    fn objective_value(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &b)| cost[b] * self.rows[r][self.n])
            .sum()
    }

    /// Run simplex iterations with Bland's rule on the given cost vector.
    /// `allowed` masks out columns that may not enter (artificials in
    /// phase 2). Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        loop {
            let red = self.reduced_costs(cost);
            let entering = (0..self.n)
                .find(|&j| allowed[j] && red[j] < -PIVOT_EPS && !self.basis.contains(&j));
            let Some(col) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a > PIVOT_EPS {
                    let ratio = self.rows[r][self.n] / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - PIVOT_EPS
                                || (ratio < lratio + PIVOT_EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
    }
}

/// Solve a standard-form LP. `feas_tol` bounds the accepted phase-1
/// residual (constraint violation of the returned point).
pub fn solve(lp: &StandardLp, feas_tol: f64) -> Result<LpOutcome> {
    let m = lp.rows.len();
    let n = lp.objective.len();
    for (i, row) in lp.rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Structural(format!(
                "LP row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    if lp.rhs.len() != m {
        return Err(Error::Structural("LP rhs length mismatch".into()));
    }

    // tableau with one artificial per row; flip rows so rhs >= 0
    let total = n + m;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; total + 1];
        for j in 0..n {
            row[j] = sign * lp.rows[i][j];
        }
        row[n + i] = 1.0;
        row[total] = sign * lp.rhs[i];
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis: (n..n + m).collect(), n: total };

    // phase 1: drive artificial mass to zero
    let mut phase1 = vec![0.0; total];
    for c in phase1.iter_mut().skip(n) {
        *c = 1.0;
    }
    let allowed = vec![true; total];
    if !tab.optimize(&phase1, &allowed) {
        return Err(Error::Numerical("phase 1 reported unbounded".into()));
    }
    let residual = tab.objective_value(&phase1);
    if residual > feas_tol {
        return Ok(LpOutcome::Infeasible { phase1_residual: residual });
    }

    // pivot remaining artificials out of the basis where possible
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| tab.rows[r][j].abs() > 1e-8) {
                tab.pivot(r, col);
            }
        }
    }

    // phase 2 on the real objective, artificials barred from entering
    let mut cost = vec![0.0; total];
    cost[..n].copy_from_slice(&lp.objective);
    let mut allowed = vec![true; total];
    for a in allowed.iter_mut().skip(n) {
        *a = false;
    }
    if !tab.optimize(&cost, &allowed) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rows[r][tab.n];
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, value })
}
