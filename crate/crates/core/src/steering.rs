//! Temporal steering: assemblages of post-measurement states and the
//! semidefinite test for a temporal hidden-state model.
//!
//! An assemblage {σ_{a|x}} is unsteerable when σ_{a|x} = Σ_λ D(a|x,λ) σ̃_λ
//! for subnormalized states σ̃_λ ⪰ 0 indexed by deterministic response
//! functions λ: x ↦ a. Membership and the certificate are both small
//! linear-matrix-inequality programs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, TOL};
use crate::solver::sdp::{self, LmiProblem, SdpOptions, SparseSym};

/// Subnormalized post-measurement states σ_{a|x}, indexed `sigma[x][a]`.
#[derive(Debug, Clone)]
pub struct Assemblage {
    dim: usize,
    sigma: Vec<Vec<CMat>>,
}

impl Assemblage {
    pub fn new(sigma: Vec<Vec<CMat>>) -> Result<Self> {
        if sigma.is_empty() || sigma[0].is_empty() {
            return Err(Error::Structural("assemblage needs at least one input and outcome".into()));
        }
        let n_out = sigma[0].len();
        let dim = sigma[0][0].nrows();
        let mut totals: Vec<CMat> = Vec::new();
        for (x, per_input) in sigma.iter().enumerate() {
            if per_input.len() != n_out {
                return Err(Error::Structural("ragged outcome count".into()));
            }
            let mut total = linalg::zeros(dim);
            for (a, m) in per_input.iter().enumerate() {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::Structural("assemblage dimension mismatch".into()));
                }
                if linalg::hermiticity_defect(m) > TOL {
                    return Err(Error::Invariant(format!("σ({a}|{x}) not Hermitian")));
                }
                if linalg::min_eigenvalue(m) < -TOL {
                    return Err(Error::Invariant(format!("σ({a}|{x}) not PSD")));
                }
                total += m;
            }
            let tr = (linalg::trace(&total).re - 1.0).abs();
            if tr > TOL {
                return Err(Error::Invariant(format!(
                    "outcomes of input {x} have total trace 1{:+.3e}",
                    tr
                )));
            }
            totals.push(total);
        }
        for t in totals.iter().skip(1) {
            if linalg::max_norm(&(t - &totals[0])) > TOL {
                return Err(Error::Invariant(
                    "nonselective states differ across inputs".into(),
                ));
            }
        }
        Ok(Self { dim, sigma })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_inputs(&self) -> usize {
        self.sigma.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.sigma[0].len()
    }

    pub fn sigma(&self, a: usize, x: usize) -> &CMat {
        &self.sigma[x][a]
    }

    /// Assemblage of a temporal hidden-state model: σ_{a|x} = Σ_λ p(λ)
    /// p(a|x,λ) σ̃_λ.
    pub fn from_hidden_state_model(
        states: &[CMat],
        p_lambda: &[f64],
        response: &dyn Fn(usize, usize, usize) -> f64, // (a, x, lambda)
        n_inputs: usize,
        n_outcomes: usize,
    ) -> Result<Self> {
        let dim = states[0].nrows();
        let mut sigma = vec![vec![linalg::zeros(dim); n_outcomes]; n_inputs];
        for x in 0..n_inputs {
            for a in 0..n_outcomes {
                for (l, st) in states.iter().enumerate() {
                    sigma[x][a] += st.scale(p_lambda[l] * response(a, x, l));
                }
            }
        }
        Self::new(sigma)
    }
}

/// Number of deterministic response functions x ↦ a.
fn n_strategies(n_inputs: usize, n_outcomes: usize) -> usize {
    n_outcomes.pow(n_inputs as u32)
}

/// Outcome assigned to input x by deterministic strategy λ.
fn respond(lambda: usize, x: usize, n_outcomes: usize) -> usize {
    (lambda / n_outcomes.pow(x as u32)) % n_outcomes
}

/// Index of a real parameter vector over Hermitian matrices: d diagonal
/// entries, then (re, im) pairs of the strict upper triangle.
fn hermitian_param_count(d: usize) -> usize {
    d * d
}

fn hermitian_from_params(d: usize, v: &[f64]) -> CMat {
    let mut m = linalg::zeros(d);
    let mut idx = 0;
    for i in 0..d {
        m[(i, i)] = crate::linalg::C64::new(v[idx], 0.0);
        idx += 1;
    }
    for i in 0..d {
        for j in i + 1..d {
            let (re, im) = (v[idx], v[idx + 1]);
            idx += 2;
            m[(i, j)] = crate::linalg::C64::new(re, im);
            m[(j, i)] = crate::linalg::C64::new(re, -im);
        }
    }
    m
}

fn hermitian_to_params(m: &CMat) -> Vec<f64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(m[(i, i)].re);
    }
    for i in 0..d {
        for j in i + 1..d {
            v.push(m[(i, j)].re);
            v.push(m[(i, j)].im);
        }
    }
    v
}

/// Real-embedding triplets of a Hermitian parameter direction, offset into
/// a block at `base`.
fn embed_direction(d: usize, param: usize, base: usize, target: &mut SparseSym) {
    let mut unit = vec![0.0; hermitian_param_count(d)];
    unit[param] = 1.0;
    let h = hermitian_from_params(d, &unit);
    let r = linalg::hermitian_to_real(&h);
    for i in 0..2 * d {
        for j in i..2 * d {
            if r[(i, j)] != 0.0 {
                target.push(base + i, base + j, r[(i, j)]);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LhsModel {
    /// Subnormalized hidden states σ̃_λ, indexed by strategy.
    pub states: Vec<CMat>,
    /// Worst negative-eigenvalue residual of the reconstruction.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SteeringInequality {
    /// Operators F_{a|x}, indexed `operators[x][a]`; Σ Tr[F σ] >= 0 for
    /// every unsteerable assemblage.
    pub operators: Vec<Vec<CMat>>,
    /// Value on the tested assemblage (negative = steering detected).
    pub value: f64,
}

impl SteeringInequality {
    pub fn evaluate(&self, assemblage: &Assemblage) -> f64 {
        let mut total = 0.0;
        for x in 0..assemblage.n_inputs() {
            for a in 0..assemblage.n_outcomes() {
                total += linalg::trace_re(&(&self.operators[x][a] * assemblage.sigma(a, x)));
            }
        }
        total
    }
}

#[derive(Debug, Clone)]
pub enum SteeringVerdict {
    Unsteerable { model: LhsModel },
    Steerable { certificate: SteeringInequality },
}

impl SteeringVerdict {
    pub fn is_steerable(&self) -> bool {
        matches!(self, SteeringVerdict::Steerable { .. })
    }
}

/// Decide whether an assemblage admits a temporal hidden-state model.
///
/// Primal: maximize t subject to σ̃_λ ⪰ t·1 and the reconstruction
/// equalities. t* ≥ -1e-7 accepts; otherwise the dual program produces a
/// steering inequality.
pub fn steering_check(assemblage: &Assemblage) -> Result<SteeringVerdict> {
    let d = assemblage.dim();
    let nx = assemblage.n_inputs();
    let na = assemblage.n_outcomes();
    let nl = n_strategies(nx, na);
    let ppm = hermitian_param_count(d); // params per matrix

    // equality system A v = b over the stacked σ̃_λ parameters
    let n_unknowns = nl * ppm;
    let n_rows = nx * na * ppm;
    let mut a = DMatrix::<f64>::zeros(n_rows, n_unknowns);
    let mut b = DMatrix::<f64>::zeros(n_rows, 1);
    for x in 0..nx {
        for out in 0..na {
            let row_base = (x * na + out) * ppm;
            let target = hermitian_to_params(assemblage.sigma(out, x));
            for (r, t) in target.iter().enumerate() {
                b[(row_base + r, 0)] = *t;
            }
            for l in 0..nl {
                if respond(l, x, na) == out {
                    for r in 0..ppm {
                        a[(row_base + r, l * ppm + r)] = 1.0;
                    }
                }
            }
        }
    }
    // minimal-norm particular solution and full nullspace via the
    // eigendecomposition of AᵀA (thin SVDs can drop nullspace directions
    // of wide systems)
    let gram = a.transpose() * &a;
    let rhs = a.transpose() * &b;
    let eig = gram.clone().symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1.0);
    let tol_rank = 1e-12 * lam_max;
    let mut particular = DMatrix::<f64>::zeros(n_unknowns, 1);
    let mut null_basis: Vec<Vec<f64>> = Vec::new();
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        if lam <= tol_rank {
            null_basis.push(v.iter().copied().collect());
        } else {
            let proj = v.dot(&rhs.column(0)) / lam;
            for r in 0..n_unknowns {
                particular[(r, 0)] += proj * v[r];
            }
        }
    }
    let residual_vec = &a * &particular - &b;
    let eq_residual = residual_vec.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if eq_residual > 1e-8 {
        return Err(Error::Numerical(format!(
            "assemblage equality system inconsistent (residual {eq_residual:.3e})"
        )));
    }

    // LMI blocks: embed(σ̃_λ(y)) - t·1 per strategy
    let block = 2 * d;
    let dim_total = nl * block;
    let n_free = null_basis.len();
    let mut f0 = SparseSym::default();
    for l in 0..nl {
        let part: Vec<f64> = particular.as_slice()[l * ppm..(l + 1) * ppm].to_vec();
        let h = hermitian_from_params(d, &part);
        let r = linalg::hermitian_to_real(&h);
        for i in 0..block {
            for j in i..block {
                if r[(i, j)] != 0.0 {
                    f0.push(l * block + i, l * block + j, r[(i, j)]);
                }
            }
        }
    }
    let mut fk: Vec<SparseSym> = Vec::new();
    for basis_vec in &null_basis {
        let mut f = SparseSym::default();
        for l in 0..nl {
            for p in 0..ppm {
                let w = basis_vec[l * ppm + p];
                if w.abs() > 1e-14 {
                    let mut dir = SparseSym::default();
                    embed_direction(d, p, l * block, &mut dir);
                    for (i, j, v) in dir.entries {
                        f.push(i, j, w * v);
                    }
                }
            }
        }
        fk.push(f);
    }
    // the t variable: -identity
    let mut ft = SparseSym::default();
    for i in 0..dim_total {
        ft.push(i, i, -1.0);
    }
    fk.push(ft);

    let mut objective = vec![0.0; n_free + 1];
    objective[n_free] = 1.0;
    // strictly feasible start: particular solution with t far below the
    // smallest eigenvalue of its blocks
    let mut min_eig = f64::INFINITY;
    for l in 0..nl {
        let part: Vec<f64> = particular.as_slice()[l * ppm..(l + 1) * ppm].to_vec();
        let h = hermitian_from_params(d, &part);
        min_eig = min_eig.min(linalg::min_eigenvalue(&h));
    }
    let mut x0 = vec![0.0; n_free + 1];
    x0[n_free] = min_eig - 1.0;

    let problem = LmiProblem {
        dim: dim_total,
        block_sizes: vec![block; nl],
        objective,
        f0,
        fk,
    };
    let sol = sdp::solve_lmi(&problem, &x0, &SdpOptions::default())?;
    let t_star = sol.x[n_free];

    if t_star >= -1e-7 {
        // reconstruct the hidden states
        let mut v = particular.as_slice().to_vec();
        for (k, basis_vec) in null_basis.iter().enumerate() {
            for (vi, bv) in v.iter_mut().zip(basis_vec) {
                *vi += sol.x[k] * bv;
            }
        }
        let mut states = Vec::with_capacity(nl);
        let mut worst = 0.0f64;
        for l in 0..nl {
            let h = hermitian_from_params(d, &v[l * ppm..(l + 1) * ppm]);
            worst = worst.max((-linalg::min_eigenvalue(&h)).max(0.0));
            states.push(h);
        }
        return Ok(SteeringVerdict::Unsteerable {
            model: LhsModel { states, residual: worst },
        });
    }

    let certificate = steering_certificate(assemblage)?;
    Ok(SteeringVerdict::Steerable { certificate })
}

/// Dual program: minimize Σ Tr[F_{a|x} σ_{a|x}] over operators whose
/// strategy aggregates G_λ = Σ_{a,x} D(a|x,λ) F_{a|x} are PSD, normalized
/// by Σ_λ Tr G_λ = 1. A negative optimum certifies steering.
fn steering_certificate(assemblage: &Assemblage) -> Result<SteeringInequality> {
    let d = assemblage.dim();
    let nx = assemblage.n_inputs();
    let na = assemblage.n_outcomes();
    let nl = n_strategies(nx, na);
    let ppm = hermitian_param_count(d);
    let block = 2 * d;

    // free parameters: all F_{a|x} components; normalization handled by
    // rescaling after the solve is not possible (it fixes the scale), so
    // eliminate one diagonal component instead.
    // Each (a,x) pair appears in n_outcomes^(n_inputs - 1) strategies.
    let multiplicity = n_strategies(nx.saturating_sub(1).max(0), na) as f64;
    // normalization: multiplicity * Σ_{a,x} Tr F_{a|x} = 1
    // eliminated variable: first diagonal entry of F_{0|0}
    let n_params = nx * na * ppm;
    let elim = 0usize; // (x=0, a=0, diagonal entry 0)
    let scale = 1.0 / multiplicity;

    // v[elim] = scale - Σ_{other diagonal components} v
    let diag_components: Vec<usize> = (0..nx * na)
        .flat_map(|m| (0..d).map(move |i| m * ppm + i))
        .collect();

    let param_value = |v_free: &[f64], p: usize| -> f64 {
        // v_free indexes all params except elim
        let free_index = |p: usize| if p < elim { p } else { p - 1 };
        if p == elim {
            let mut others = 0.0;
            for &dc in &diag_components {
                if dc != elim {
                    others += v_free[free_index(dc)];
                }
            }
            scale - others
        } else {
            v_free[free_index(p)]
        }
    };

    // LMI: blocks G_λ(v) ⪰ 0
    let dim_total = nl * block;
    let n_free = n_params - 1;

    // constant part from the eliminated variable at value `scale`
    let mut f0 = SparseSym::default();
    let mut unit = vec![0.0; ppm];
    unit[0] = scale;
    let h_elim = hermitian_from_params(d, &unit);
    for l in 0..nl {
        if respond(l, 0, na) == 0 {
            let r = linalg::hermitian_to_real(&h_elim);
            for i in 0..block {
                for j in i..block {
                    if r[(i, j)] != 0.0 {
                        f0.push(l * block + i, l * block + j, r[(i, j)]);
                    }
                }
            }
        }
    }

    let mut fk: Vec<SparseSym> = Vec::with_capacity(n_free);
    for p_full in 0..n_params {
        if p_full == elim {
            continue;
        }
        let m = p_full / ppm; // (x * na + a)
        let comp = p_full % ppm;
        let x = m / na;
        let a = m % na;
        let mut f = SparseSym::default();
        for l in 0..nl {
            if respond(l, x, na) == a {
                embed_direction(d, comp, l * block, &mut f);
            }
        }
        // substitution of the eliminated diagonal component
        if comp < d && p_full != elim {
            // v[elim] loses 1 per unit of this diagonal component
            let mut dir = SparseSym::default();
            for l in 0..nl {
                if respond(l, 0, na) == 0 {
                    embed_direction(d, 0, l * block, &mut dir);
                }
            }
            for (i, j, v) in dir.entries {
                f.push(i, j, -v);
            }
        }
        fk.push(f);
    }

    // objective: minimize Σ Tr[F σ] => maximize its negative
    let sigma_params: Vec<Vec<f64>> = (0..nx * na)
        .map(|m| {
            let x = m / na;
            let a = m % na;
            hermitian_to_params(assemblage.sigma(a, x))
        })
        .collect();
    // Tr[H(v) S] over the real parameterization: diagonal components weigh
    // s_ii, off-diagonal (re, im) weigh 2 s_re and 2 s_im
    let trace_weight = |m: usize, comp: usize| -> f64 {
        let s = &sigma_params[m];
        if comp < d {
            s[comp]
        } else {
            2.0 * s[comp]
        }
    };
    let mut objective = vec![0.0; n_free];
    let mut obj_constant = scale * trace_weight(0, 0);
    let mut idx = 0;
    for p_full in 0..n_params {
        if p_full == elim {
            continue;
        }
        let m = p_full / ppm;
        let comp = p_full % ppm;
        objective[idx] = -trace_weight(m, comp);
        if comp < d {
            objective[idx] += trace_weight(0, 0); // eliminated var decreases
        }
        idx += 1;
    }
    obj_constant = -obj_constant;

    // strictly feasible start: every F_{a|x} = α·1 with α chosen so the
    // normalization lands the eliminated variable exactly at α as well;
    // then G_λ = α·n_inputs·1 is positive definite
    let alpha = scale / (nx * na * d) as f64;
    let mut x0 = vec![0.0; n_free];
    let free_index = |p: usize| if p < elim { p } else { p - 1 };
    for m in 0..nx * na {
        for i in 0..d {
            let p = m * ppm + i;
            if p != elim {
                x0[free_index(p)] = alpha;
            }
        }
    }
    let problem = LmiProblem {
        dim: dim_total,
        block_sizes: vec![block; nl],
        objective,
        f0,
        fk,
    };
    let sol = sdp::solve_lmi(&problem, &x0, &SdpOptions::default())?;

    // assemble the operators
    let mut v_full = vec![0.0; n_params];
    for p in 0..n_params {
        v_full[p] = param_value(&sol.x, p);
    }
    let mut operators = vec![vec![linalg::zeros(d); na]; nx];
    for x in 0..nx {
        for a in 0..na {
            let m = x * na + a;
            operators[x][a] = hermitian_from_params(d, &v_full[m * ppm..(m + 1) * ppm]);
        }
    }
    let _ = obj_constant;
    let mut cert = SteeringInequality { operators, value: 0.0 };
    cert.value = cert.evaluate(assemblage);
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qubit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mub_assemblage() -> Assemblage {
        // Lüders z and x measurements on the maximally mixed qubit
        let z = crate::quantum::Povm::dichotomic(&qubit::sigma_z(), 0.0).unwrap();
        let x = crate::quantum::Povm::dichotomic(&qubit::sigma_x(), 0.0).unwrap();
        let sigma = vec![
            z.effects().iter().map(|p| p.scale(0.5)).collect(),
            x.effects().iter().map(|p| p.scale(0.5)).collect(),
        ];
        Assemblage::new(sigma).unwrap()
    }

    fn random_lhs_assemblage(rng: &mut impl Rng, dim: usize, nx: usize, na: usize) -> Assemblage {
        let nl = na.pow(nx as u32);
        let states: Vec<CMat> = (0..nl).map(|_| linalg::random_density(dim, rng)).collect();
        let mut p_lambda: Vec<f64> = (0..nl).map(|_| rng.gen::<f64>() + 0.01).collect();
        let total: f64 = p_lambda.iter().sum();
        for p in &mut p_lambda {
            *p /= total;
        }
        // deterministic responders: p(a|x,λ) = D(a|x,λ)
        Assemblage::from_hidden_state_model(
            &states,
            &p_lambda,
            &|a, x, l| if respond(l, x, na) == a { 1.0 } else { 0.0 },
            nx,
            na,
        )
        .unwrap()
    }

    #[test]
    fn single_input_is_unsteerable() {
        let z = crate::quantum::Povm::dichotomic(&qubit::sigma_z(), 0.0).unwrap();
        let sigma = vec![z.effects().iter().map(|p| p.scale(0.5)).collect()];
        let assemblage = Assemblage::new(sigma).unwrap();
        let verdict = steering_check(&assemblage).unwrap();
        assert!(!verdict.is_steerable());
    }

    #[test]
    fn lhs_constructions_are_unsteerable() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let assemblage = random_lhs_assemblage(&mut rng, 2, 2, 2);
            let verdict = steering_check(&assemblage).unwrap();
            match verdict {
                SteeringVerdict::Unsteerable { model } => {
                    assert!(model.residual <= 1e-7);
                }
                SteeringVerdict::Steerable { .. } => panic!("LHS assemblage flagged steerable"),
            }
        }
    }

    #[test]
    fn mub_assemblage_is_steerable_with_certificate() {
        let assemblage = mub_assemblage();
        let verdict = steering_check(&assemblage).unwrap();
        let SteeringVerdict::Steerable { certificate } = verdict else {
            panic!("two mutually unbiased bases must steer");
        };
        assert!(certificate.value < -1e-7, "certificate value {}", certificate.value);

        // the certificate is nonnegative on LHS assemblages
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let lhs = random_lhs_assemblage(&mut rng, 2, 2, 2);
            assert!(certificate.evaluate(&lhs) >= -1e-7);
        }
    }

    #[test]
    fn inconsistent_assemblage_is_rejected() {
        let z = crate::quantum::Povm::dichotomic(&qubit::sigma_z(), 0.0).unwrap();
        let x = crate::quantum::Povm::dichotomic(&qubit::sigma_x(), 0.0).unwrap();
        // second input reweighted: nonselective states differ
        let sigma = vec![
            z.effects().iter().map(|p| p.scale(0.5)).collect(),
            vec![x.effects()[0].scale(0.7), x.effects()[1].scale(0.3)],
        ];
        assert!(Assemblage::new(sigma).is_err());
    }
}
