//! Dense semidefinite solver for linear-matrix-inequality problems:
//!
//!   maximize  c·x   subject to   F(x) = F0 + Σ_k x_k F_k  ⪰ 0,
//!
//! via log-det barrier path following with damped Newton steps. Problem
//! sizes in this crate are tiny (matrix side below ~100, a few hundred
//! variables), so everything is dense and deterministic.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;

/// Symmetric sparse matrix stored as upper-triangle triplets (i <= j).
#[derive(Debug, Clone, Default)]
pub struct SparseSym {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((a, b, v));
    }

    pub fn to_dense(&self, dim: usize) -> RMat {
        let mut m = RMat::zeros(dim, dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        m
    }

    /// Tr(M S) for symmetric dense M.
    fn inner(&self, m: &RMat) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * m[(i, j)] } else { 2.0 * v * m[(i, j)] })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct LmiProblem {
    /// Matrix side of F(x).
    pub dim: usize,
    /// Diagonal block sizes (must sum to `dim`); informational, used by the
    /// sparse export.
    pub block_sizes: Vec<usize>,
    pub objective: Vec<f64>,
    pub f0: SparseSym,
    pub fk: Vec<SparseSym>,
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    /// Target barrier duality gap mu * dim.
    pub gap_tol: f64,
    /// Barrier reduction factor per stage.
    pub mu_factor: f64,
    pub max_newton_per_stage: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, mu_factor: 8.0, max_newton_per_stage: 60 }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Barrier estimate of the duality gap at the returned point.
    pub gap: f64,
    /// Dual matrix Z = mu F(x)^{-1}. At the central point it satisfies
    /// Tr(Z F_k) ≈ -c_k, so Tr(Z F0) is a certified upper bound on the
    /// optimum (equal to `value + gap` on the central path).
    pub dual: RMat,
    /// Tr(Z F0), the dual objective.
    pub upper_bound: f64,
    pub newton_iterations: usize,
}

fn assemble(p: &LmiProblem, x: &[f64]) -> RMat {
    let mut f = p.f0.to_dense(p.dim);
    for (k, fk) in p.fk.iter().enumerate() {
        if x[k] != 0.0 {
            for &(i, j, v) in &fk.entries {
                f[(i, j)] += x[k] * v;
                if i != j {
                    f[(j, i)] += x[k] * v;
                }
            }
        }
    }
    f
}

fn chol_logdet(f: &RMat) -> Option<(Cholesky<f64, nalgebra::Dyn>, f64)> {
    let ch = Cholesky::new(f.clone())?;
    let logdet = ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    Some((ch, logdet))
}

/// Solve the LMI maximization from a strictly feasible start `x0`
/// (F(x0) must be positive definite).
pub fn solve_lmi(p: &LmiProblem, x0: &[f64], opts: &SdpOptions) -> Result<SdpSolution> {
    let nvars = p.objective.len();
    if p.fk.len() != nvars || x0.len() != nvars {
        return Err(Error::Structural("LMI variable count mismatch".into()));
    }
    if p.block_sizes.iter().sum::<usize>() != p.dim {
        return Err(Error::Structural("LMI block sizes do not sum to the matrix side".into()));
    }
    let mut x = DVector::from_column_slice(x0);
    let f = assemble(p, x.as_slice());
    let Some((_, _)) = chol_logdet(&f) else {
        return Err(Error::Numerical("initial LMI point is not strictly feasible".into()));
    };

    let c = DVector::from_column_slice(&p.objective);
    let nu = p.dim as f64;
    let c_scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let mut mu = c_scale.max(1.0);
    let mu_min = (opts.gap_tol / nu).max(1e-14);
    let mut newton_total = 0usize;

    let dense_fk: Vec<RMat> = p.fk.iter().map(|s| s.to_dense(p.dim)).collect();

    loop {
        // Newton iterations on phi(x) = -c.x - mu log det F(x)
        for _ in 0..opts.max_newton_per_stage {
            newton_total += 1;
            let f = assemble(p, x.as_slice());
            let Some((ch, logdet)) = chol_logdet(&f) else {
                return Err(Error::Numerical("barrier iterate left the PSD cone".into()));
            };
            let phi0 = -c.dot(&x) - mu * logdet;
            let finv = ch.inverse();

            let mut grad = DVector::zeros(nvars);
            let mut w = Vec::with_capacity(nvars);
            for k in 0..nvars {
                grad[k] = -c[k] - mu * p.fk[k].inner(&finv);
                w.push(&finv * &dense_fk[k] * &finv);
            }
            let mut hess = RMat::zeros(nvars, nvars);
            for k in 0..nvars {
                for l in k..nvars {
                    let v = mu * p.fk[k].inner(&w[l]);
                    hess[(k, l)] = v;
                    hess[(l, k)] = v;
                }
            }
            // ridge fallback for rank-deficient Hessians
            let mut ridge = 0.0;
            let dir = loop {
                let mut h = hess.clone();
                if ridge > 0.0 {
                    for i in 0..nvars {
                        h[(i, i)] += ridge;
                    }
                }
                match Cholesky::new(h) {
                    Some(ch) => break ch.solve(&(-&grad)),
                    None => {
                        ridge = if ridge == 0.0 { 1e-12 * mu.max(1.0) } else { ridge * 100.0 };
                        if ridge > 1e6 {
                            return Err(Error::Numerical("barrier Hessian is numerically singular".into()));
                        }
                    }
                }
            };
            let decrement = -grad.dot(&dir);
            if !decrement.is_finite() {
                return Err(Error::Numerical("barrier Newton direction diverged".into()));
            }
            // scale-free Newton decrement of the self-concordant barrier
            let lambda2 = decrement / mu;
            if lambda2 <= 1e-14 {
                break;
            }

            let strictly_feasible = |xt: &DVector<f64>| -> Option<f64> {
                let f = assemble(p, xt.as_slice());
                let (_, logdet) = chol_logdet(&f)?;
                Some(-c.dot(xt) - mu * logdet)
            };
            if lambda2 <= 0.09 {
                // quadratic-convergence region: take the full step
                let xt = &x + &dir;
                if strictly_feasible(&xt).is_some() {
                    x = xt;
                    continue;
                }
            }
            // damped phase: backtrack on phi
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-13 {
                let xt = &x + &dir * alpha;
                if let Some(val) = strictly_feasible(&xt) {
                    if val < phi0 {
                        x = xt;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if mu <= mu_min {
            break;
        }
        mu = (mu / opts.mu_factor).max(mu_min);
    }

    let f = assemble(p, x.as_slice());
    let (ch, _) = chol_logdet(&f)
        .ok_or_else(|| Error::Numerical("final barrier iterate not positive definite".into()))?;
    let dual = ch.inverse() * mu;
    let value = c.dot(&x);
    let upper_bound = p.f0.inner(&dual);
    Ok(SdpSolution {
        x: x.as_slice().to_vec(),
        value,
        gap: mu * nu,
        dual,
        upper_bound,
        newton_iterations: newton_total,
    })
}

/// Documented sparse text export of an LMI problem, for external solvers.
///
/// Line format (whitespace separated, `#` starts a comment):
///   vars <K>
///   blocks <b1> <b2> ...          cone block sizes, summing to the side
///   c <k> <value>                 objective coefficient of variable k (1-based)
///   F <k> <i> <j> <value>         upper-triangle entry of F_k; k = 0 is the
///                                 constant block F0; i, j are 1-based
/// The encoded problem is: maximize c·x with F0 + Σ_k x_k F_k PSD.
pub fn write_sparse(p: &LmiProblem, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "# sparse LMI export v1")?;
    writeln!(out, "# maximize c.x subject to F0 + sum_k x_k F_k >= 0")?;
    writeln!(out, "vars {}", p.objective.len())?;
    let blocks: Vec<String> = p.block_sizes.iter().map(|b| b.to_string()).collect();
    writeln!(out, "blocks {}", blocks.join(" "))?;
    for (k, v) in p.objective.iter().enumerate() {
        if *v != 0.0 {
            writeln!(out, "c {} {:.17e}", k + 1, v)?;
        }
    }
    for &(i, j, v) in &p.f0.entries {
        writeln!(out, "F 0 {} {} {:.17e}", i + 1, j + 1, v)?;
    }
    for (k, fk) in p.fk.iter().enumerate() {
        for &(i, j, v) in &fk.entries {
            writeln!(out, "F {} {} {} {:.17e}", k + 1, i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// maximize x subject to [[1, x], [x, 1]] >= 0  ->  x* = 1.
    #[test]
    fn solves_two_by_two_correlation() {
        let mut f0 = SparseSym::default();
        f0.push(0, 0, 1.0);
        f0.push(1, 1, 1.0);
        let mut f1 = SparseSym::default();
        f1.push(0, 1, 1.0);
        let p = LmiProblem {
            dim: 2,
            block_sizes: vec![2],
            objective: vec![1.0],
            f0,
            fk: vec![f1],
        };
        let sol = solve_lmi(&p, &[0.0], &SdpOptions::default()).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-7, "value {}", sol.value);
        assert!(sol.gap <= 1e-7);
    }

    /// maximize x + y subject to diag(1-x, 1-y, 1+x+y) >= 0 -> max = 2 at
    /// x = y = 1.
    #[test]
    fn solves_diagonal_program() {
        let mut f0 = SparseSym::default();
        for i in 0..3 {
            f0.push(i, i, 1.0);
        }
        let mut f1 = SparseSym::default();
        f1.push(0, 0, -1.0);
        f1.push(2, 2, 1.0);
        let mut f2 = SparseSym::default();
        f2.push(1, 1, -1.0);
        f2.push(2, 2, 1.0);
        let p = LmiProblem {
            dim: 3,
            block_sizes: vec![1, 1, 1],
            objective: vec![1.0, 1.0],
            f0,
            fk: vec![f1, f2],
        };
        let sol = solve_lmi(&p, &[0.0, 0.0], &SdpOptions::default()).unwrap();
        assert!((sol.value - 2.0).abs() < 1e-7, "value {}", sol.value);
    }

    /// Dual matrix certifies stationarity: Tr(Z F_k) ≈ -c_k at the optimum,
    /// and Tr(Z F0) upper-bounds the optimal value.
    #[test]
    fn dual_matches_objective() {
        let mut f0 = SparseSym::default();
        f0.push(0, 0, 1.0);
        f0.push(1, 1, 1.0);
        let mut f1 = SparseSym::default();
        f1.push(0, 1, 1.0);
        let p = LmiProblem {
            dim: 2,
            block_sizes: vec![2],
            objective: vec![1.0],
            f0,
            fk: vec![f1.clone()],
        };
        let sol = solve_lmi(&p, &[0.0], &SdpOptions::default()).unwrap();
        let resid = (f1.inner(&sol.dual) + 1.0).abs();
        assert!(resid < 1e-6, "stationarity residual {resid}");
        assert!(sol.upper_bound >= sol.value - 1e-12);
        assert!(sol.upper_bound - 1.0 <= 1e-7, "upper bound {}", sol.upper_bound);
    }

    #[test]
    fn export_round_trips_header() {
        let mut f0 = SparseSym::default();
        f0.push(0, 0, 1.0);
        let p = LmiProblem {
            dim: 1,
            block_sizes: vec![1],
            objective: vec![1.0],
            f0,
            fk: vec![SparseSym::default()],
        };
        let mut buf = Vec::new();
        write_sparse(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("vars 1"));
        assert!(text.contains("blocks 1"));
        assert!(text.contains("F 0 1 1"));
    }
}
