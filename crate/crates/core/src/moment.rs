//! Moment-matrix relaxation for sequential projective measurements.
//!
//! The matrix is indexed by canonical words of reduced projector symbols up
//! to a length cap L; its entries ⟨w (w')†⟩ fall into equality classes
//! determined by the word algebra (hermiticity, orthogonality, idempotence
//! and completeness). Every probability of a measurement sequence of length
//! at most L is a linear functional of the classes, so maximizing a linear
//! expression over all quantum realizations is a semidefinite program.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{LinearExpression, Term};
use crate::linalg::{self, CMat};
use crate::solver::sdp::{self, LmiProblem, SdpOptions, SparseSym};
use crate::words::{self, CanonWord, Symbol, WordPoly};

/// Sequence scenario for the relaxation: settings are indexed 0..S, each
/// with a finite outcome count.
#[derive(Debug, Clone)]
pub struct MomentScenario {
    pub outcomes_per_setting: Vec<u16>,
}

impl MomentScenario {
    pub fn uniform(n_settings: usize, n_outcomes: u16) -> Self {
        Self { outcomes_per_setting: vec![n_outcomes; n_settings] }
    }

    fn reduced_symbols(&self) -> Vec<Symbol> {
        let mut syms = Vec::new();
        for (s, &n) in self.outcomes_per_setting.iter().enumerate() {
            for q in 0..n.saturating_sub(1) {
                syms.push((s as u16, q));
            }
        }
        syms
    }
}

/// Entry classes of the symbolic moment matrix.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    pub scenario: MomentScenario,
    pub level: usize,
    /// Canonical index words, sorted by (length, lexicographic).
    pub index_words: Vec<Vec<Symbol>>,
    /// Class id per entry, upper triangle flattened row-major; None = zero.
    entry_class: Vec<Option<usize>>,
    /// Representative word per class (class 0 is the identity word).
    pub class_reps: Vec<Vec<Symbol>>,
    class_of_word: BTreeMap<Vec<Symbol>, usize>,
}

impl MomentMatrix {
    pub fn side(&self) -> usize {
        self.index_words.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_reps.len()
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * self.side() + b - a * (a + 1) / 2
    }

    pub fn class_at(&self, i: usize, j: usize) -> Option<usize> {
        self.entry_class[self.upper_index(i, j)]
    }

    /// Class of an arbitrary canonical word, if it appears in the matrix.
    pub fn class_of(&self, word: &CanonWord) -> Result<Option<usize>> {
        match word {
            CanonWord::Zero => Ok(None),
            CanonWord::Word(w) => {
                let key = canonical_rep(w);
                self.class_of_word.get(&key).copied().map(Some).ok_or_else(|| {
                    Error::Structural(format!("word {w:?} does not appear in the moment matrix"))
                })
            }
        }
    }
}

/// Class representative: a word and its reversal share real part, so the
/// lexicographically smaller of the two represents the class.
fn canonical_rep(word: &[Symbol]) -> Vec<Symbol> {
    let mut rev = word.to_vec();
    rev.reverse();
    if rev < word.to_vec() {
        rev
    } else {
        word.to_vec()
    }
}

/// Build the symbolic moment matrix of all canonical words up to length
/// `level`.
pub fn build_moment_matrix(scenario: &MomentScenario, level: usize) -> Result<MomentMatrix> {
    if level == 0 {
        return Err(Error::Structural("moment-matrix level must be at least 1".into()));
    }
    let symbols = scenario.reduced_symbols();
    if symbols.is_empty() {
        return Err(Error::Structural("scenario has no nontrivial outcomes".into()));
    }
    // breadth-first enumeration of canonical words
    let mut index_words: Vec<Vec<Symbol>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<Symbol>> = vec![Vec::new()];
    for _ in 0..level {
        let mut next = Vec::new();
        for w in &frontier {
            for &s in &symbols {
                let mut cand = w.clone();
                cand.push(s);
                if let CanonWord::Word(c) = words::canonicalize(&cand) {
                    if c.len() == cand.len() && !index_words.contains(&c) {
                        index_words.push(c.clone());
                        next.push(c);
                    }
                }
            }
        }
        frontier = next;
    }
    index_words.sort_by(|a, b| (a.len(), a.clone()).cmp(&(b.len(), b.clone())));

    let side = index_words.len();
    let mut class_of_word: BTreeMap<Vec<Symbol>, usize> = BTreeMap::new();
    let mut class_reps: Vec<Vec<Symbol>> = Vec::new();
    // class 0 is the identity (normalization ⟨1⟩ = 1)
    class_of_word.insert(Vec::new(), 0);
    class_reps.push(Vec::new());

    let mut entry_class = vec![None; side * (side + 1) / 2];
    let mut flat = 0usize;
    for i in 0..side {
        for j in i..side {
            let left = CanonWord::Word(index_words[i].clone());
            let right = words::adjoint(&CanonWord::Word(index_words[j].clone()));
            let prod = words::multiply(&left, &right);
            entry_class[flat] = match prod {
                CanonWord::Zero => None,
                CanonWord::Word(w) => {
                    let rep = canonical_rep(&w);
                    let id = *class_of_word.entry(rep.clone()).or_insert_with(|| {
                        class_reps.push(rep.clone());
                        class_reps.len() - 1
                    });
                    Some(id)
                }
            };
            flat += 1;
        }
    }
    Ok(MomentMatrix {
        scenario: scenario.clone(),
        level,
        index_words,
        entry_class,
        class_reps,
        class_of_word,
    })
}

/// Probability of an outcome word under a setting word, as an affine
/// functional over the matrix classes: (constant, coefficient per class).
pub fn probability_functional(
    matrix: &MomentMatrix,
    settings: &[u16],
    outcomes: &[u16],
) -> Result<(f64, Vec<(usize, f64)>)> {
    if settings.len() != outcomes.len() {
        return Err(Error::Structural("settings/outcomes length mismatch".into()));
    }
    if settings.len() > matrix.level {
        return Err(Error::Structural(format!(
            "sequence of length {} exceeds matrix level {}",
            settings.len(),
            matrix.level
        )));
    }
    let mut poly = WordPoly::one();
    for (&s, &q) in settings.iter().zip(outcomes) {
        let n = *matrix
            .scenario
            .outcomes_per_setting
            .get(s as usize)
            .ok_or_else(|| Error::Structural(format!("setting {s} out of range")))?;
        if q >= n {
            return Err(Error::Structural(format!("outcome {q} out of range for setting {s}")));
        }
        poly = poly.mul(&words::projector_poly(s, q, n));
    }
    // p = ⟨P P†⟩ expanded over pairs of canonical words
    let mut constant = 0.0;
    let mut by_class: BTreeMap<usize, f64> = BTreeMap::new();
    for (u, cu) in &poly.terms {
        for (v, cv) in &poly.terms {
            let mut vr = v.clone();
            vr.reverse();
            let mut joined = u.clone();
            joined.extend_from_slice(&vr);
            match words::canonicalize(&joined) {
                CanonWord::Zero => {}
                CanonWord::Word(w) if w.is_empty() => constant += cu * cv,
                CanonWord::Word(w) => {
                    let rep = canonical_rep(&w);
                    let id = matrix.class_of_word.get(&rep).copied().ok_or_else(|| {
                        Error::Structural(format!("entry word {w:?} missing from the matrix"))
                    })?;
                    *by_class.entry(id).or_insert(0.0) += cu * cv;
                }
            }
        }
    }
    Ok((constant, by_class.into_iter().collect()))
}

/// Compile the moment matrix into an LMI problem for a linear objective
/// over class variables (class 0 is pinned to 1 and folded into F0).
fn compile_lmi(matrix: &MomentMatrix, objective_by_class: &[f64]) -> LmiProblem {
    let side = matrix.side();
    let n_vars = matrix.n_classes() - 1; // class 0 pinned
    let mut f0 = SparseSym::default();
    let mut fk: Vec<SparseSym> = vec![SparseSym::default(); n_vars];
    for i in 0..side {
        for j in i..side {
            match matrix.class_at(i, j) {
                None => {}
                Some(0) => f0.push(i, j, 1.0),
                Some(k) => fk[k - 1].push(i, j, 1.0),
            }
        }
    }
    LmiProblem {
        dim: side,
        block_sizes: vec![side],
        objective: objective_by_class[1..].to_vec(),
        f0,
        fk,
    }
}

/// Numeric moment matrix of an explicit realization (state + projective
/// measurements), evaluated class-wise. Used to seed the interior-point
/// iteration with a strictly feasible point.
fn realization_point(matrix: &MomentMatrix, dim: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let scenario = &matrix.scenario;
    let rho = linalg::random_density(dim, rng);
    // random projective measurement per setting: partition the columns of a
    // random unitary into outcome groups
    let mut projectors: Vec<Vec<CMat>> = Vec::new();
    for &n in &scenario.outcomes_per_setting {
        let u = linalg::random_unitary(dim, rng);
        let n = n as usize;
        let mut effs = Vec::with_capacity(n);
        let base = dim / n;
        let extra = dim % n;
        let mut col = 0;
        for q in 0..n {
            let take = base + usize::from(q < extra);
            let mut p = linalg::zeros(dim);
            for _ in 0..take {
                let v = u.column(col).clone_owned();
                p += linalg::projector(&v);
                col += 1;
            }
            effs.push(p);
        }
        projectors.push(effs);
    }
    let op_of_word = |w: &[Symbol]| -> CMat {
        let mut op = linalg::identity(dim);
        for &(s, q) in w {
            op = op * &projectors[s as usize][q as usize];
        }
        op
    };
    matrix
        .class_reps
        .iter()
        .map(|rep| linalg::trace_re(&(&rho * op_of_word(rep))))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ProjectiveBound {
    pub value: f64,
    pub gap: f64,
    pub matrix_side: usize,
    pub n_classes: usize,
    /// Optimal class values (index 0 is the pinned normalization).
    pub class_values: Vec<f64>,
}

/// Expression terms resolved to (coefficient, settings word, outcomes word)
/// over moment-scenario indices.
pub type SequenceTerm = (f64, Vec<u16>, Vec<u16>);

/// Translate a Leggett-Garg style expression into sequence terms over the
/// moment scenario where setting i is the observable measured at time i,
/// with binary outcomes valued +1 (index 0) and -1 (index 1).
pub fn lg_sequence_terms(expression: &LinearExpression) -> Result<Vec<SequenceTerm>> {
    let mut terms = Vec::new();
    for (coefficient, term) in &expression.terms {
        match term {
            Term::Correlator { positions } => {
                if positions.len() != 2 {
                    return Err(Error::Structural(
                        "only pairwise correlators map onto sequence terms".into(),
                    ));
                }
                let (a, b) = (positions[0], positions[1]);
                let (first, second) = if a <= b { (a, b) } else { (b, a) };
                for qa in 0..2u16 {
                    for qb in 0..2u16 {
                        let sign = if (qa + qb) % 2 == 0 { 1.0 } else { -1.0 };
                        terms.push((
                            coefficient * sign,
                            vec![first as u16, second as u16],
                            vec![qa, qb],
                        ));
                    }
                }
            }
            Term::SeqProb { .. } => {
                return Err(Error::Structural(
                    "raw sequence terms must be provided in moment-scenario indices".into(),
                ));
            }
        }
    }
    Ok(terms)
}

/// Upper bound on a linear expression over sequence probabilities for
/// projective measurements of unconstrained dimension.
pub fn max_expression_projective(
    scenario: &MomentScenario,
    terms: &[SequenceTerm],
    level: usize,
    seed: u64,
) -> Result<ProjectiveBound> {
    let needed = terms.iter().map(|(_, s, _)| s.len()).max().unwrap_or(1);
    if level < needed {
        return Err(Error::Structural(format!(
            "level {level} below the longest referenced sequence ({needed})"
        )));
    }
    let matrix = build_moment_matrix(scenario, level)?;
    let mut objective = vec![0.0; matrix.n_classes()];
    let mut constant = 0.0;
    for (coefficient, settings, outcomes) in terms {
        let (c0, coeffs) = probability_functional(&matrix, settings, outcomes)?;
        constant += coefficient * c0;
        for (class, v) in coeffs {
            objective[class] += coefficient * v;
        }
    }
    let problem = compile_lmi(&matrix, &objective);

    // strictly feasible start: average a few random realizations
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = (matrix.side() as f64).sqrt().ceil() as usize + 2;
    let dim = dim.max(
        scenario
            .outcomes_per_setting
            .iter()
            .map(|&n| n as usize)
            .max()
            .unwrap_or(2),
    );
    let mut x0 = vec![0.0; matrix.n_classes()];
    let n_avg = 8;
    for _ in 0..n_avg {
        let point = realization_point(&matrix, dim, &mut rng);
        for (acc, v) in x0.iter_mut().zip(&point) {
            *acc += v / n_avg as f64;
        }
    }

    let sol = sdp::solve_lmi(&problem, &x0[1..], &SdpOptions::default()).map_err(|e| {
        Error::Numerical(format!("moment-matrix solve failed: {e}"))
    })?;
    let mut class_values = vec![1.0];
    class_values.extend_from_slice(&sol.x);
    Ok(ProjectiveBound {
        value: sol.value + constant + objective[0],
        gap: sol.gap,
        matrix_side: matrix.side(),
        n_classes: matrix.n_classes(),
        class_values,
    })
}

/// Sparse export of the compiled semidefinite program for one expression.
pub fn export_sdp(
    scenario: &MomentScenario,
    terms: &[SequenceTerm],
    level: usize,
    out: &mut impl std::io::Write,
) -> Result<()> {
    let matrix = build_moment_matrix(scenario, level)?;
    let mut objective = vec![0.0; matrix.n_classes()];
    for (coefficient, settings, outcomes) in terms {
        let (_, coeffs) = probability_functional(&matrix, settings, outcomes)?;
        for (class, v) in coeffs {
            objective[class] += coefficient * v;
        }
    }
    let problem = compile_lmi(&matrix, &objective);
    sdp::write_sparse(&problem, out)
        .map_err(|e| Error::Numerical(format!("export failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::lgi_n;

    #[test]
    fn level_two_matrix_indexes_pairwise_sequences() {
        let scenario = MomentScenario::uniform(3, 2);
        let matrix = build_moment_matrix(&scenario, 2).unwrap();
        // identity + 3 singles + 6 ordered pairs of distinct settings
        assert_eq!(matrix.side(), 10);
        // idempotence: the word ΠΠ collapses, its entry is the single class
        let diag = matrix.class_at(1, 1).unwrap();
        let single = matrix.class_of(&CanonWord::Word(vec![(0, 0)])).unwrap().unwrap();
        assert_eq!(diag, single);
    }

    #[test]
    fn orthogonal_entries_are_zero() {
        let scenario = MomentScenario::uniform(2, 3);
        let matrix = build_moment_matrix(&scenario, 1).unwrap();
        // index words contain Π_{0|0} and Π_{1|0}; their product is zero
        let i = matrix.index_words.iter().position(|w| w == &vec![(0u16, 0u16)]).unwrap();
        let j = matrix.index_words.iter().position(|w| w == &vec![(0u16, 1u16)]).unwrap();
        assert!(matrix.class_at(i, j).is_none());
    }

    #[test]
    fn probability_functionals_sum_to_one() {
        let scenario = MomentScenario::uniform(3, 2);
        let matrix = build_moment_matrix(&scenario, 2).unwrap();
        // sum over all outcome words of one setting word must be the
        // constant functional 1
        let mut constant = 0.0;
        let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
        for qa in 0..2 {
            for qb in 0..2 {
                let (c, f) = probability_functional(&matrix, &[0, 1], &[qa, qb]).unwrap();
                constant += c;
                for (k, v) in f {
                    *coeffs.entry(k).or_insert(0.0) += v;
                }
            }
        }
        assert!((constant - 1.0).abs() < 1e-12);
        for (_, v) in coeffs {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn chained_lgi_bounds_match_closed_form() {
        for n in [3usize, 4, 5] {
            let scenario = MomentScenario::uniform(n, 2);
            let terms = lg_sequence_terms(&lgi_n(n).unwrap()).unwrap();
            let bound = max_expression_projective(&scenario, &terms, 2, 7).unwrap();
            let expected = n as f64 * (std::f64::consts::PI / n as f64).cos();
            assert!(
                (bound.value - expected).abs() < 1e-6,
                "N={n}: got {}, expected {expected}",
                bound.value
            );
        }
    }
}
