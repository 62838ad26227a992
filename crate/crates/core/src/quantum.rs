//! Finite-dimensional quantum objects and exact simulation of measurement
//! sequences: density operators, POVMs, instruments (Kraus form), channels,
//! and the sequence models that generate behaviors.

use crate::error::{Error, Result};
use crate::linalg::{self, C64, CMat, CVec, TOL};
use crate::scenario::{Behavior, Scenario};

/// Density operator on a finite-dimensional Hilbert space.
#[derive(Debug, Clone)]
pub struct QuantumState {
    dim: usize,
    matrix: CMat,
}

impl QuantumState {
    pub fn new(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Structural("state matrix must be square and nonempty".into()));
        }
        let herm = linalg::hermiticity_defect(&matrix);
        if herm > TOL {
            return Err(Error::Invariant(format!("state not Hermitian, defect {herm:.3e}")));
        }
        let tr = (linalg::trace(&matrix) - C64::new(1.0, 0.0)).norm();
        if tr > TOL {
            return Err(Error::Invariant(format!("state trace differs from 1 by {tr:.3e}")));
        }
        let min_ev = linalg::min_eigenvalue(&matrix);
        if min_ev < -TOL {
            return Err(Error::Invariant(format!("state has negative eigenvalue {min_ev:.3e}")));
        }
        Ok(Self { dim: matrix.nrows(), matrix })
    }

    pub fn pure(ket: &CVec) -> Result<Self> {
        let n = ket.norm();
        if (n - 1.0).abs() > TOL {
            return Err(Error::Invariant(format!("ket norm differs from 1 by {:.3e}", (n - 1.0).abs())));
        }
        Self::new(linalg::projector(ket))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { dim, matrix: linalg::identity(dim).scale(1.0 / dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn expectation(&self, observable: &CMat) -> f64 {
        linalg::trace_re(&(observable * &self.matrix))
    }
}

/// One entry of a validation report: which invariant failed and by how much.
#[derive(Debug, Clone)]
pub struct Violation {
    pub invariant: String,
    pub magnitude: f64,
}

/// Result of checking the POVM invariants. Empty `violations` means valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, invariant: impl Into<String>, magnitude: f64) {
        self.violations.push(Violation { invariant: invariant.into(), magnitude });
    }
}

/// Checks Hermiticity and positivity of each effect and completeness of the
/// sum. Structural problems (empty list, dimension mismatch) are errors,
/// not report entries.
pub fn validate_povm(effects: &[CMat]) -> Result<ValidationReport> {
    if effects.is_empty() {
        return Err(Error::Structural("POVM needs at least one effect".into()));
    }
    let dim = effects[0].nrows();
    for (i, m) in effects.iter().enumerate() {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::Structural(format!(
                "effect {i} is {}x{}, expected {dim}x{dim}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let mut report = ValidationReport::default();
    let mut sum = linalg::zeros(dim);
    for (i, m) in effects.iter().enumerate() {
        let herm = linalg::hermiticity_defect(m);
        if herm > TOL {
            report.push(format!("effect {i} not Hermitian"), herm);
        }
        let min_ev = linalg::min_eigenvalue(&((m + m.adjoint()).scale(0.5)));
        if min_ev < -TOL {
            report.push(format!("effect {i} not PSD"), -min_ev);
        }
        sum += m;
    }
    let defect = linalg::max_norm(&(sum - linalg::identity(dim)));
    if defect > TOL {
        report.push("completeness", defect);
    }
    Ok(report)
}

/// Positive operator valued measure with ordered outcome labels.
#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    outcomes: Vec<String>,
    effects: Vec<CMat>,
}

impl Povm {
    pub fn new(outcomes: Vec<String>, effects: Vec<CMat>) -> Result<Self> {
        if outcomes.len() != effects.len() {
            return Err(Error::Structural("outcome/effect count mismatch".into()));
        }
        let report = validate_povm(&effects)?;
        if !report.is_valid() {
            let worst = &report.violations[0];
            return Err(Error::Invariant(format!(
                "invalid POVM: {} (magnitude {:.3e})",
                worst.invariant, worst.magnitude
            )));
        }
        Ok(Self { dim: effects[0].nrows(), outcomes, effects })
    }

    /// Two-outcome projective measurement of a Hermitian observable with a
    /// sign coarse-graining: "+" collects eigenvalues >= split, "-" the rest.
    pub fn dichotomic(observable: &CMat, split: f64) -> Result<Self> {
        let (vals, vecs) = linalg::hermitian_eigen(observable);
        let dim = observable.nrows();
        let mut plus = linalg::zeros(dim);
        let mut minus = linalg::zeros(dim);
        for (i, &v) in vals.iter().enumerate() {
            let col = vecs.column(i).clone_owned();
            if v >= split {
                plus += linalg::projector(&col);
            } else {
                minus += linalg::projector(&col);
            }
        }
        Self::new(vec!["+".into(), "-".into()], vec![plus, minus])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn effects(&self) -> &[CMat] {
        &self.effects
    }

    pub fn effect(&self, outcome: &str) -> Option<&CMat> {
        self.outcomes.iter().position(|o| o == outcome).map(|i| &self.effects[i])
    }
}

/// Measurement with state update: one nonempty Kraus list per outcome.
#[derive(Debug, Clone)]
pub struct Instrument {
    dim: usize,
    outcomes: Vec<String>,
    kraus: Vec<Vec<CMat>>,
}

impl Instrument {
    pub fn new(outcomes: Vec<String>, kraus: Vec<Vec<CMat>>) -> Result<Self> {
        if outcomes.len() != kraus.len() || outcomes.is_empty() {
            return Err(Error::Structural("outcome/Kraus-list count mismatch".into()));
        }
        let dim = kraus
            .first()
            .and_then(|l| l.first())
            .map(|k| k.nrows())
            .ok_or_else(|| Error::Structural("empty Kraus list".into()))?;
        let mut gram = linalg::zeros(dim);
        for (q, list) in kraus.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Structural(format!("outcome {q} has no Kraus operators")));
            }
            for k in list {
                if k.nrows() != dim || k.ncols() != dim {
                    return Err(Error::Structural("Kraus dimension mismatch".into()));
                }
                gram += k.adjoint() * k;
            }
        }
        let defect = linalg::max_norm(&(gram - linalg::identity(dim)));
        if defect > TOL {
            return Err(Error::Invariant(format!("instrument not trace-preserving, defect {defect:.3e}")));
        }
        Ok(Self { dim, outcomes, kraus })
    }

    /// Identity instrument: single outcome, no state change.
    pub fn identity(dim: usize, outcome: impl Into<String>) -> Self {
        Self { dim, outcomes: vec![outcome.into()], kraus: vec![vec![linalg::identity(dim)]] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn kraus(&self) -> &[Vec<CMat>] {
        &self.kraus
    }

    pub fn kraus_for(&self, outcome: &str) -> Option<&[CMat]> {
        self.outcomes.iter().position(|o| o == outcome).map(|i| self.kraus[i].as_slice())
    }

    /// Subnormalized post-measurement state for one outcome.
    pub fn apply(&self, q: usize, rho: &CMat) -> CMat {
        linalg::apply_kraus(&self.kraus[q], rho)
    }
}

/// Lüders update rule: one Kraus operator sqrt(M_q) per outcome.
pub fn luders_instrument(povm: &Povm) -> Result<Instrument> {
    let mut kraus = Vec::with_capacity(povm.effects.len());
    for m in &povm.effects {
        let root = linalg::psd_sqrt(m, TOL)
            .ok_or_else(|| Error::Invariant("effect has eigenvalue below -1e-9".into()))?;
        kraus.push(vec![root]);
    }
    Instrument::new(povm.outcomes.clone(), kraus)
}

/// Von Neumann update rule: every outcome updates through the rank-1
/// projectors of its coarse-graining class.
///
/// `basis` columns must be orthonormal; `coarse_graining[i]` names the
/// outcome that basis vector `i` reports.
pub fn von_neumann_instrument(basis: &CMat, coarse_graining: &[String]) -> Result<Instrument> {
    let dim = basis.nrows();
    if basis.ncols() != dim || coarse_graining.len() != dim {
        return Err(Error::Structural("need one coarse-graining label per basis vector".into()));
    }
    let gram_defect = linalg::max_norm(&(basis.adjoint() * basis - linalg::identity(dim)));
    if gram_defect > TOL {
        return Err(Error::Invariant(format!("basis not orthonormal, defect {gram_defect:.3e}")));
    }
    let mut outcomes: Vec<String> = Vec::new();
    for label in coarse_graining {
        if !outcomes.contains(label) {
            outcomes.push(label.clone());
        }
    }
    let mut kraus: Vec<Vec<CMat>> = vec![Vec::new(); outcomes.len()];
    for i in 0..dim {
        let v = basis.column(i).clone_owned();
        let q = outcomes.iter().position(|o| o == &coarse_graining[i]).unwrap();
        kraus[q].push(linalg::projector(&v));
    }
    Instrument::new(outcomes, kraus)
}

/// Discretized Gaussian-pointer measurement of a Hermitian observable.
///
/// Kraus operators follow exp(-(x-Q)^2 / 4 s^2) on a finite pointer grid;
/// the x-weights are renormalized separately for every eigenvalue of Q so
/// that the effects resolve the identity exactly.
pub fn gaussian_pointer_povm(
    observable: &CMat,
    s: f64,
    grid: &[(f64, f64)],
) -> Result<Povm> {
    if s <= 0.0 {
        return Err(Error::Structural("pointer width s must be positive".into()));
    }
    if grid.is_empty() || grid.iter().any(|&(_, w)| w <= 0.0) {
        return Err(Error::Structural("grid weights must be positive".into()));
    }
    if linalg::hermiticity_defect(observable) > TOL {
        return Err(Error::Invariant("observable not Hermitian".into()));
    }
    let (vals, vecs) = linalg::hermitian_eigen(observable);
    let dim = observable.nrows();
    // per-eigenvalue normalizer: sum_x w_x exp(-(x-lambda)^2 / 2 s^2)
    let gauss = |x: f64, lambda: f64| (-(x - lambda).powi(2) / (2.0 * s * s)).exp();
    let norms: Vec<f64> = vals
        .iter()
        .map(|&l| grid.iter().map(|&(x, w)| w * gauss(x, l)).sum())
        .collect();
    let mut outcomes = Vec::with_capacity(grid.len());
    let mut effects = Vec::with_capacity(grid.len());
    for &(x, w) in grid {
        let mut m = linalg::zeros(dim);
        for (i, &l) in vals.iter().enumerate() {
            let weight = w * gauss(x, l) / norms[i];
            let col = vecs.column(i).clone_owned();
            m += linalg::projector(&col).scale(weight);
        }
        outcomes.push(format!("{x}"));
        effects.push(m);
    }
    Povm::new(outcomes, effects)
}

/// POVM induced by an instrument: M_q = sum_i K_i† K_i.
pub fn instrument_povm(instr: &Instrument) -> Result<Povm> {
    let effects: Vec<CMat> = instr.kraus.iter().map(|list| linalg::kraus_gram(list)).collect();
    Povm::new(instr.outcomes.clone(), effects)
}

/// Nonselective channel of an instrument: all Kraus operators pooled.
pub fn nonselective_channel(instr: &Instrument) -> Vec<CMat> {
    instr.kraus.iter().flatten().cloned().collect()
}

/// Outcome of the state-independent nondisturbance check.
#[derive(Debug, Clone)]
pub struct DisturbanceReport {
    pub nondisturbing: bool,
    pub max_deviation: f64,
}

/// Whether measuring `first` (nonselectively) leaves the statistics of
/// `later` unchanged for every initial state: Λ†(M_b) = M_b for all effects.
pub fn is_nondisturbing(first: &Instrument, later: &Povm, tol: f64) -> Result<DisturbanceReport> {
    if first.dim != later.dim {
        return Err(Error::Structural("instrument/POVM dimension mismatch".into()));
    }
    let channel = nonselective_channel(first);
    let mut max_dev: f64 = 0.0;
    for m in &later.effects {
        let pulled = linalg::apply_kraus_adjoint(&channel, m);
        max_dev = max_dev.max(linalg::max_norm(&(pulled - m)));
    }
    Ok(DisturbanceReport { nondisturbing: max_dev <= tol, max_deviation: max_dev })
}

/// Initial state, one instrument per setting, and an optional channel
/// applied between consecutive steps.
#[derive(Debug, Clone)]
pub struct QuantumSequenceModel {
    initial: QuantumState,
    settings: Vec<String>,
    instruments: Vec<Instrument>,
    inter_step_channel: Option<Vec<CMat>>,
}

impl QuantumSequenceModel {
    pub fn new(
        initial: QuantumState,
        settings: Vec<String>,
        instruments: Vec<Instrument>,
        inter_step_channel: Option<Vec<CMat>>,
    ) -> Result<Self> {
        if settings.len() != instruments.len() || settings.is_empty() {
            return Err(Error::Structural("need one instrument per setting".into()));
        }
        let dim = initial.dim();
        for instr in &instruments {
            if instr.dim() != dim {
                return Err(Error::Structural("instrument dimension mismatch".into()));
            }
        }
        if let Some(ch) = &inter_step_channel {
            for k in ch {
                if k.nrows() != dim || k.ncols() != dim {
                    return Err(Error::Structural("channel dimension mismatch".into()));
                }
            }
            let defect = linalg::max_norm(&(linalg::kraus_gram(ch) - linalg::identity(dim)));
            if defect > TOL {
                return Err(Error::Invariant(format!(
                    "inter-step channel not trace-preserving, defect {defect:.3e}"
                )));
            }
        }
        // the conventional no-measurement setting must be trivial
        if let Some(idx) = settings.iter().position(|s| s == "0") {
            let instr = &instruments[idx];
            if instr.outcomes().len() != 1 {
                return Err(Error::Structural("setting 0 must have a single outcome".into()));
            }
        }
        Ok(Self { initial, settings, instruments, inter_step_channel })
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    pub fn initial(&self) -> &QuantumState {
        &self.initial
    }

    pub fn settings(&self) -> &[String] {
        &self.settings
    }

    pub fn instrument(&self, setting: &str) -> Option<&Instrument> {
        self.settings.iter().position(|s| s == setting).map(|i| &self.instruments[i])
    }

    pub fn inter_step_channel(&self) -> Option<&[CMat]> {
        self.inter_step_channel.as_deref()
    }
}

/// Full outcome distribution of one setting sequence.
///
/// Walks the branching tree of subnormalized states: instrument of s_1,
/// inter-step channel, instrument of s_2, and so on. Each leaf trace is the
/// probability of its outcome word.
pub fn sequence_probability(
    model: &QuantumSequenceModel,
    settings: &[String],
) -> Result<Vec<(Vec<String>, f64)>> {
    for s in settings {
        if model.instrument(s).is_none() {
            return Err(Error::Structural(format!("unknown setting label {s:?}")));
        }
    }
    let mut branches: Vec<(Vec<String>, CMat)> =
        vec![(Vec::new(), model.initial.matrix().clone())];
    for (step, s) in settings.iter().enumerate() {
        if step > 0 {
            if let Some(ch) = &model.inter_step_channel {
                for b in &mut branches {
                    b.1 = linalg::apply_kraus(ch, &b.1);
                }
            }
        }
        let instr = model.instrument(s).unwrap();
        let mut next = Vec::with_capacity(branches.len() * instr.outcomes().len());
        for (word, rho) in &branches {
            for (q, label) in instr.outcomes().iter().enumerate() {
                let mut w = word.clone();
                w.push(label.clone());
                next.push((w, instr.apply(q, rho)));
            }
        }
        branches = next;
    }
    Ok(branches
        .into_iter()
        .map(|(word, rho)| (word, linalg::trace_re(&rho)))
        .collect())
}

/// Direct evaluation of the projective sandwich formula
/// p = Tr[rho P P†] with P = P_1 P_2 ... P_n (time order left to right).
///
/// Independent of the branching simulation above; used to cross-check it on
/// projective Lüders models. `projectors[k]` is the projector measured at
/// step k (already Heisenberg-evolved if there is inter-step dynamics).
pub fn projective_sandwich_probability(rho: &CMat, projectors: &[CMat]) -> f64 {
    let dim = rho.nrows();
    let mut prod = linalg::identity(dim);
    for p in projectors {
        prod = prod * p;
    }
    linalg::trace_re(&(rho * &prod * prod.adjoint()))
}

/// Simulate every setting sequence in `schedule` and collect the results
/// into a behavior over `scenario`.
pub fn behavior_from_model(
    model: &QuantumSequenceModel,
    scenario: &Scenario,
    schedule: &[Vec<String>],
) -> Result<Behavior> {
    let mut behavior = Behavior::empty(scenario.clone());
    for settings in schedule {
        if settings.len() != scenario.length() {
            return Err(Error::Structural(format!(
                "schedule entry has length {}, scenario expects {}",
                settings.len(),
                scenario.length()
            )));
        }
        let dist = sequence_probability(model, settings)?;
        behavior.insert_distribution(settings.clone(), dist)?;
    }
    Ok(behavior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qubit;
    use crate::scenario::ScenarioBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sz_povm() -> Povm {
        Povm::dichotomic(&qubit::sigma_z(), 0.0).unwrap()
    }

    fn random_instrument(dim: usize, n_out: usize, rng: &mut impl rand::Rng) -> Instrument {
        // random isometry column blocks give a trace-preserving instrument
        let u = linalg::random_unitary(dim * n_out, rng);
        let mut kraus = Vec::new();
        for q in 0..n_out {
            let mut k = linalg::zeros(dim);
            for i in 0..dim {
                for j in 0..dim {
                    k[(i, j)] = u[(q * dim + i, j)];
                }
            }
            kraus.push(vec![k]);
        }
        Instrument::new((0..n_out).map(|q| q.to_string()).collect(), kraus).unwrap()
    }

    #[test]
    fn validate_povm_examples() {
        let proj = sz_povm();
        assert!(validate_povm(proj.effects()).unwrap().is_valid());

        let half = linalg::identity(2).scale(0.5);
        assert!(validate_povm(&[half.clone(), half.clone()]).unwrap().is_valid());

        let id = linalg::identity(2);
        let report = validate_povm(&[id.clone(), id]).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert!((report.violations[0].magnitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validate_povm_dimension_mismatch_is_structural() {
        let bad = validate_povm(&[linalg::identity(2), linalg::identity(3)]);
        assert!(matches!(bad, Err(Error::Structural(_))));
    }

    #[test]
    fn luders_of_projectors_is_projectors() {
        let povm = sz_povm();
        let instr = luders_instrument(&povm).unwrap();
        for (k, m) in instr.kraus().iter().zip(povm.effects()) {
            assert!(linalg::max_norm(&(&k[0] - m)) < 1e-12);
        }
    }

    #[test]
    fn luders_of_trivial_povm_is_scalar_root() {
        let half = linalg::identity(2).scale(0.5);
        let povm = Povm::new(vec!["a".into(), "b".into()], vec![half.clone(), half]).unwrap();
        let instr = luders_instrument(&povm).unwrap();
        let expected = linalg::identity(2).scale(1.0 / 2.0_f64.sqrt());
        assert!(linalg::max_norm(&(&instr.kraus()[0][0] - &expected)) < 1e-12);
    }

    #[test]
    fn luders_of_random_rank1_povm_is_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // two rank-1 pieces plus the PSD remainder form a valid POVM
        let v = linalg::random_ket(2, &mut rng);
        let m1 = linalg::projector(&v).scale(0.6);
        let w = linalg::random_ket(2, &mut rng);
        let m2 = linalg::projector(&w).scale(0.3);
        let m3 = linalg::identity(2) - &m1 - &m2;
        if linalg::min_eigenvalue(&m3) < 0.0 {
            return; // construction failed for this seed; nothing to assert
        }
        let povm = Povm::new(vec!["1".into(), "2".into(), "3".into()], vec![m1, m2, m3]).unwrap();
        let instr = luders_instrument(&povm).unwrap();
        let all: Vec<CMat> = instr.kraus().iter().flatten().cloned().collect();
        let gram = linalg::kraus_gram(&all);
        assert!(linalg::max_norm(&(gram - linalg::identity(2))) < 1e-9);
    }

    #[test]
    fn von_neumann_identity_coarse_graining_matches_luders() {
        let basis = linalg::identity(2);
        let vn = von_neumann_instrument(&basis, &["+".into(), "-".into()]).unwrap();
        let lu = luders_instrument(&sz_povm()).unwrap();
        for (a, b) in vn.kraus().iter().zip(lu.kraus()) {
            assert!(linalg::max_norm(&(&a[0] - &b[0])) < 1e-12);
        }
    }

    #[test]
    fn von_neumann_spin1_coarse_graining() {
        let basis = linalg::identity(3);
        let cg = vec!["-1".to_string(), "+1".to_string(), "+1".to_string()];
        let instr = von_neumann_instrument(&basis, &cg).unwrap();
        assert_eq!(instr.kraus_for("+1").unwrap().len(), 2);
        assert_eq!(instr.kraus_for("-1").unwrap().len(), 1);
        let povm = instrument_povm(&instr).unwrap();
        // coarse-grained projector for +1 has rank 2
        let tr = linalg::trace_re(povm.effect("+1").unwrap());
        assert!((tr - 2.0).abs() < 1e-12);
    }

    #[test]
    fn von_neumann_all_to_one_outcome_dephases() {
        let basis = linalg::identity(3);
        let cg = vec!["0".to_string(); 3];
        let instr = von_neumann_instrument(&basis, &cg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = linalg::random_density(3, &mut rng);
        let out = instr.apply(0, &rho);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(out[(i, j)].norm() < 1e-12);
                } else {
                    assert!((out[(i, j)] - rho[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn von_neumann_rejects_non_orthonormal() {
        let mut basis = linalg::identity(2);
        basis[(0, 1)] = C64::new(0.5, 0.0);
        assert!(von_neumann_instrument(&basis, &["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn gaussian_pointer_strong_limit() {
        let grid = [(-1.0, 1.0), (1.0, 1.0)];
        let povm = gaussian_pointer_povm(&qubit::sigma_z(), 1e-3, &grid).unwrap();
        let proj = sz_povm();
        // grid point +1 picks up the +1 eigenprojector
        assert!(linalg::max_norm(&(povm.effect("1").unwrap() - proj.effect("+").unwrap())) < 1e-6);
        assert!(linalg::max_norm(&(povm.effect("-1").unwrap() - proj.effect("-").unwrap())) < 1e-6);
    }

    #[test]
    fn gaussian_pointer_weak_limit() {
        let grid = [(-1.0, 1.0), (1.0, 1.0)];
        let povm = gaussian_pointer_povm(&qubit::sigma_z(), 1e3, &grid).unwrap();
        let half = linalg::identity(2).scale(0.5);
        for m in povm.effects() {
            assert!(linalg::max_norm(&(m - &half)) < 1e-5);
        }
    }

    #[test]
    fn gaussian_pointer_first_moment_quadrature() {
        // symmetric grid, s = 1: the matrix-valued path must agree with a
        // scalar quadrature over eigenvalue weights computed independently
        let s = 1.0;
        let grid: Vec<(f64, f64)> = (-40..=40).map(|i| (i as f64 * 0.25, 0.25)).collect();
        let povm = gaussian_pointer_povm(&qubit::sigma_z(), s, &grid).unwrap();
        let rho = QuantumState::pure(&qubit::ket0()).unwrap();
        let first_moment: f64 = grid
            .iter()
            .map(|&(x, _)| x * rho.expectation(povm.effect(&format!("{x}")).unwrap()))
            .sum();

        // scalar oracle: rho = |0><0| lives entirely on eigenvalue +1
        let gauss = |x: f64, l: f64| (-(x - l).powi(2) / (2.0 * s * s)).exp();
        let norm: f64 = grid.iter().map(|&(x, w)| w * gauss(x, 1.0)).sum();
        let oracle: f64 = grid.iter().map(|&(x, w)| x * w * gauss(x, 1.0) / norm).sum();

        assert!((first_moment - oracle).abs() < 1e-12);
        assert!((first_moment - rho.expectation(&qubit::sigma_z())).abs() < 1e-9);
    }

    #[test]
    fn gaussian_pointer_rejects_bad_width() {
        let grid = [(-1.0, 1.0), (1.0, 1.0)];
        assert!(gaussian_pointer_povm(&qubit::sigma_z(), 0.0, &grid).is_err());
        assert!(gaussian_pointer_povm(&qubit::sigma_z(), -1.0, &grid).is_err());
    }

    #[test]
    fn gaussian_pointer_converges_monotonically() {
        let grid = [(-1.0, 1.0), (1.0, 1.0)];
        let proj = sz_povm();
        let mut last = f64::INFINITY;
        for s in [1.0, 0.1, 0.01, 0.001] {
            let povm = gaussian_pointer_povm(&qubit::sigma_z(), s, &grid).unwrap();
            let dev = linalg::max_norm(&(povm.effect("1").unwrap() - proj.effect("+").unwrap()));
            // strictly decreasing until the deviation underflows to zero
            assert!(dev < last || (dev <= last && last < 1e-12));
            last = dev;
        }
    }

    #[test]
    fn instrument_povm_of_luders_returns_input() {
        let povm = sz_povm();
        let instr = luders_instrument(&povm).unwrap();
        let back = instrument_povm(&instr).unwrap();
        for (a, b) in back.effects().iter().zip(povm.effects()) {
            assert!(linalg::max_norm(&(a - b)) < 1e-12);
        }
    }

    #[test]
    fn instrument_povm_of_random_instrument_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let instr = random_instrument(3, 2, &mut rng);
            let povm = instrument_povm(&instr).unwrap();
            assert!(validate_povm(povm.effects()).unwrap().is_valid());
        }
    }

    #[test]
    fn nonselective_channel_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let instr = random_instrument(2, 3, &mut rng);
        let ch = nonselective_channel(&instr);
        let rho = linalg::random_density(2, &mut rng);
        let out = linalg::apply_kraus(&ch, &rho);
        assert!((linalg::trace_re(&out) - 1.0).abs() < 1e-12);

        let lu = luders_instrument(&sz_povm()).unwrap();
        let deph = linalg::apply_kraus(&nonselective_channel(&lu), &rho);
        assert!(deph[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn nondisturbance_examples() {
        let lu_z = luders_instrument(&sz_povm()).unwrap();
        let povm_z = sz_povm();
        let povm_x = Povm::dichotomic(&qubit::sigma_x(), 0.0).unwrap();

        let r = is_nondisturbing(&lu_z, &povm_z, 1e-9).unwrap();
        assert!(r.nondisturbing);

        let r = is_nondisturbing(&lu_z, &povm_x, 1e-9).unwrap();
        assert!(!r.nondisturbing);
        assert!((r.max_deviation - 0.5).abs() < 1e-12);

        let half = linalg::identity(2).scale(0.5);
        let trivial = Povm::new(vec!["a".into(), "b".into()], vec![half.clone(), half]).unwrap();
        let lu_trivial = luders_instrument(&trivial).unwrap();
        let r = is_nondisturbing(&lu_trivial, &povm_x, 1e-9).unwrap();
        assert!(r.nondisturbing);
    }

    fn lg_scenario(n: usize) -> Scenario {
        ScenarioBuilder::leggett_garg(n).build().unwrap()
    }

    /// Qubit precessing by pi/3 per step, measured in sigma_z: the standard
    /// three-time Leggett-Garg model.
    pub fn rotating_qubit_model() -> QuantumSequenceModel {
        let povm = sz_povm();
        let lu = luders_instrument(&povm).unwrap();
        let skip = Instrument::identity(2, "0");
        // rotation by pi/3 in the (y,z) Bloch plane per step
        let u = linalg::unitary_evolution(&qubit::sigma_x(), std::f64::consts::PI / 6.0);
        QuantumSequenceModel::new(
            QuantumState::pure(&qubit::ket0()).unwrap(),
            vec!["0".into(), "1".into()],
            vec![skip, lu],
            Some(vec![u]),
        )
        .unwrap()
    }

    #[test]
    fn repeated_projective_measurement_is_repeatable() {
        let lu = luders_instrument(&sz_povm()).unwrap();
        let model = QuantumSequenceModel::new(
            QuantumState::pure(&qubit::ket0()).unwrap(),
            vec!["1".into()],
            vec![lu],
            None,
        )
        .unwrap();
        let dist = sequence_probability(&model, &["1".into(), "1".into()]).unwrap();
        for (word, p) in dist {
            if word == vec!["+".to_string(), "+".to_string()] {
                assert!((p - 1.0).abs() < 1e-12);
            } else {
                assert!(p.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotating_qubit_correlators() {
        let model = rotating_qubit_model();
        let scenario = lg_scenario(3);
        let schedule = vec![
            vec!["1".into(), "1".into(), "0".into()],
            vec!["1".into(), "0".into(), "1".into()],
            vec!["0".into(), "1".into(), "1".into()],
        ];
        let behavior = behavior_from_model(&model, &scenario, &schedule).unwrap();
        let c12 = behavior.correlator(&schedule[0], &[0, 1]).unwrap();
        let c13 = behavior.correlator(&schedule[1], &[0, 2]).unwrap();
        let c23 = behavior.correlator(&schedule[2], &[1, 2]).unwrap();
        assert!((c12 - 0.5).abs() < 1e-12);
        assert!((c23 - 0.5).abs() < 1e-12);
        assert!((c13 + 0.5).abs() < 1e-12);
        assert!((c12 + c23 - c13 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sequence_probability_rejects_unknown_setting() {
        let model = rotating_qubit_model();
        assert!(sequence_probability(&model, &["2".into()]).is_err());
    }

    #[test]
    fn empty_schedule_gives_empty_behavior() {
        let model = rotating_qubit_model();
        let scenario = lg_scenario(3);
        let behavior = behavior_from_model(&model, &scenario, &[]).unwrap();
        assert!(behavior.is_empty());
    }

    #[test]
    fn sandwich_formula_matches_branching_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let rho = linalg::random_density(2, &mut rng);
            let u = linalg::random_unitary(2, &mut rng);
            let n: [f64; 3] = [0.0, 2.0 * rng.gen::<f64>() - 1.0, 2.0 * rng.gen::<f64>() - 1.0];
            let len = (n[1] * n[1] + n[2] * n[2]).sqrt();
            if len < 1e-3 {
                continue;
            }
            let obs = qubit::bloch_observable([0.0, n[1] / len, n[2] / len]);
            let povm = Povm::dichotomic(&obs, 0.0).unwrap();
            let lu = luders_instrument(&povm).unwrap();
            let model = QuantumSequenceModel::new(
                QuantumState::new(rho.clone()).unwrap(),
                vec!["1".into()],
                vec![lu],
                Some(vec![u.clone()]),
            )
            .unwrap();
            let dist = sequence_probability(&model, &["1".into(), "1".into(), "1".into()]).unwrap();
            for (word, p) in dist {
                // Heisenberg projectors: step k projector conjugated by U^k
                let projs: Vec<CMat> = word
                    .iter()
                    .enumerate()
                    .map(|(k, q)| {
                        let base = povm.effect(q).unwrap().clone();
                        let mut uk = linalg::identity(2);
                        for _ in 0..k {
                            uk = &u * uk;
                        }
                        uk.adjoint() * base * uk
                    })
                    .collect();
                let direct = projective_sandwich_probability(&rho, &projs);
                assert!((p - direct).abs() < 1e-12, "mismatch {p} vs {direct}");
            }
        }
    }

    #[test]
    fn random_models_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..100 {
            let dim = 2 + (trial % 3);
            let rho = linalg::random_density(dim, &mut rng);
            let i1 = random_instrument(dim, 2, &mut rng);
            let i2 = random_instrument(dim, 3, &mut rng);
            let model = QuantumSequenceModel::new(
                QuantumState::new(rho).unwrap(),
                vec!["a".into(), "b".into()],
                vec![i1, i2],
                None,
            )
            .unwrap();
            let dist = sequence_probability(&model, &["a".into(), "b".into(), "a".into()]).unwrap();
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(dist.iter().all(|&(_, p)| p >= -1e-12));
        }
    }
}
