//! Macrorealist-polytope membership, deterministic strategies of the
//! arrow-of-time polytope, and classical bounds of linear expressions.
//!
//! Membership is a linear program over global value assignments: the
//! behavior is macrorealist iff a joint distribution over one hidden value
//! per (step, quantity) reproduces every stored entry as a marginal.

use std::collections::BTreeMap;

use crate::diagnostics::check_aot;
use crate::error::{Error, Result};
use crate::expr::{self, LinearExpression, Term};
use crate::scenario::{Behavior, Scenario, Word};
use crate::solver::lp::{self, LpOutcome, StandardLp};

/// LP feasibility tolerance; behaviors are snapped to this grid before
/// certification so simulation round-off cannot flip the verdict.
pub const LP_TOL: f64 = 1e-7;

const ASSIGNMENT_GUARD: usize = 1_000_000;
const STRATEGY_GUARD: usize = 10_000_000;

/// Hidden-value slots of a scenario: one per (step, measurement setting).
#[derive(Debug, Clone)]
pub struct AssignmentSpace {
    /// (step, setting label, outcome alphabet).
    pub slots: Vec<(usize, String, Vec<String>)>,
}

impl AssignmentSpace {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let mut slots = Vec::new();
        for step in 0..scenario.length() {
            for def in scenario.measurement_settings() {
                slots.push((step, def.label.clone(), def.outcomes.clone()));
            }
        }
        Self { slots }
    }

    pub fn count(&self) -> usize {
        self.slots.iter().map(|(_, _, o)| o.len()).product()
    }

    /// Outcome index of slot `slot` in assignment number `idx`
    /// (mixed-radix decoding, slot 0 fastest).
    fn digit(&self, idx: usize, slot: usize) -> usize {
        let mut rest = idx;
        for s in 0..slot {
            rest /= self.slots[s].2.len();
        }
        rest % self.slots[slot].2.len()
    }

    fn slot_of(&self, step: usize, setting: &str) -> Option<usize> {
        self.slots.iter().position(|(i, s, _)| *i == step && s == setting)
    }

    /// Does assignment `idx` reproduce the outcome word under the settings
    /// word (deterministically)? Skip steps are consistent by convention.
    pub fn consistent(&self, idx: usize, scenario: &Scenario, settings: &[String], outcomes: &[String]) -> bool {
        for (step, (s, q)) in settings.iter().zip(outcomes).enumerate() {
            if scenario.is_skip(s) {
                continue;
            }
            let slot = self.slot_of(step, s).expect("settings validated against scenario");
            let q_idx = self.digit(idx, slot);
            if &self.slots[slot].2[q_idx] != q {
                return false;
            }
        }
        true
    }

    /// Readable form of one assignment.
    pub fn describe(&self, idx: usize) -> Vec<(usize, String, String)> {
        self.slots
            .iter()
            .enumerate()
            .map(|(slot, (step, s, outs))| (*step, s.clone(), outs[self.digit(idx, slot)].clone()))
            .collect()
    }
}

/// Explicit joint distribution over global value assignments.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    pub space: AssignmentSpace,
    pub probabilities: Vec<f64>,
}

impl JointDistribution {
    pub fn marginal(&self, scenario: &Scenario, settings: &[String], outcomes: &[String]) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.space.consistent(*idx, scenario, settings, outcomes))
            .map(|(_, p)| p)
            .sum()
    }
}

/// Separating functional found on rejection: certificate value
/// c·p - bound is <= 0 on every deterministic assignment and positive on
/// the rejected behavior (a valid Leggett-Garg-type inequality).
#[derive(Debug, Clone)]
pub struct InfeasibilityCertificate {
    /// Coefficient per behavior entry, normalized to max |c| = 1.
    pub coefficients: Vec<((Word, Word), f64)>,
    /// Maximum of the functional over deterministic assignments.
    pub deterministic_bound: f64,
    /// Value of the functional on the tested behavior.
    pub behavior_value: f64,
}

impl InfeasibilityCertificate {
    pub fn violation(&self) -> f64 {
        self.behavior_value - self.deterministic_bound
    }

    /// Evaluate the certificate functional on an arbitrary behavior.
    pub fn evaluate(&self, behavior: &Behavior) -> Result<f64> {
        let mut total = 0.0;
        for ((s, q), c) in &self.coefficients {
            total += c * behavior.prob(s, q)?;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone)]
pub enum MrVerdict {
    Accepted { witness: JointDistribution, max_residual: f64 },
    Rejected { certificate: InfeasibilityCertificate },
}

impl MrVerdict {
    pub fn is_macrorealist(&self) -> bool {
        matches!(self, MrVerdict::Accepted { .. })
    }
}

fn behavior_entries(behavior: &Behavior) -> Vec<(Word, Word, f64)> {
    let mut entries = Vec::new();
    for settings in behavior.sequences() {
        for (outcomes, p) in behavior.distribution(settings).unwrap() {
            // snap to the LP grid
            let snapped = (p * 1e7).round() / 1e7;
            entries.push((settings.clone(), outcomes.clone(), snapped));
        }
    }
    entries
}

/// Decide membership of a behavior in the macrorealist polytope.
///
/// The behavior must satisfy the arrow-of-time constraints at `tol`
/// (otherwise the question is ill-posed and an error is returned). On
/// acceptance an explicit joint distribution is produced; on rejection a
/// separating hyperplane over the stored entries.
pub fn is_macrorealist(behavior: &Behavior, tol: f64) -> Result<MrVerdict> {
    let aot = check_aot(behavior, tol);
    if !aot.passes(tol) {
        return Err(Error::Invariant(format!(
            "behavior violates arrow-of-time constraints (max deviation {:.3e}); macrorealism is ill-posed",
            aot.max_deviation
        )));
    }
    let scenario = behavior.scenario().clone();
    let space = AssignmentSpace::for_scenario(&scenario);
    let n_assign = space.count();
    if n_assign > ASSIGNMENT_GUARD {
        return Err(Error::SizeGuard(format!(
            "{n_assign} global assignments exceed the membership guard {ASSIGNMENT_GUARD}"
        )));
    }
    let entries = behavior_entries(behavior);
    if entries.is_empty() {
        return Err(Error::MissingData("behavior is empty".into()));
    }

    // Chebyshev membership LP:
    //   min t  s.t.  |A_e P - b_e| <= t,  sum P = 1,  P >= 0
    // variables: P (n_assign), t, then u_e, w_e slacks per entry
    let n_e = entries.len();
    let n_vars = n_assign + 1 + 2 * n_e;
    let mut rows = Vec::with_capacity(2 * n_e + 1);
    let mut rhs = Vec::with_capacity(2 * n_e + 1);
    for (e, (s, q, p)) in entries.iter().enumerate() {
        let mut up = vec![0.0; n_vars];
        let mut dn = vec![0.0; n_vars];
        for a in 0..n_assign {
            if space.consistent(a, &scenario, s, q) {
                up[a] = 1.0;
                dn[a] = 1.0;
            }
        }
        up[n_assign] = -1.0; // -t
        up[n_assign + 1 + e] = 1.0; // +u_e
        dn[n_assign] = 1.0; // +t
        dn[n_assign + 1 + n_e + e] = -1.0; // -w_e
        rows.push(up);
        rhs.push(*p);
        rows.push(dn);
        rhs.push(*p);
    }
    let mut norm = vec![0.0; n_vars];
    norm[..n_assign].fill(1.0);
    rows.push(norm);
    rhs.push(1.0);

    let mut objective = vec![0.0; n_vars];
    objective[n_assign] = 1.0;
    let lp_problem = StandardLp { objective, rows, rhs };
    let outcome = lp::solve(&lp_problem, 1e-9)?;
    let (x, t_star) = match outcome {
        LpOutcome::Optimal { x, value } => (x, value),
        LpOutcome::Infeasible { phase1_residual } => {
            return Err(Error::Numerical(format!(
                "membership LP unexpectedly infeasible (residual {phase1_residual:.3e})"
            )))
        }
        LpOutcome::Unbounded => {
            return Err(Error::Numerical("membership LP unbounded".into()))
        }
    };

    if t_star <= tol.max(LP_TOL) {
        let witness = JointDistribution {
            space,
            probabilities: x[..n_assign].to_vec(),
        };
        return Ok(MrVerdict::Accepted { witness, max_residual: t_star });
    }

    let certificate = separating_certificate(&scenario, &space, &entries)?;
    Ok(MrVerdict::Rejected { certificate })
}

/// Best separating functional with coefficients in [-1, 1]:
///   max  c·b - s   s.t.  c·a_v <= s for every assignment v.
fn separating_certificate(
    scenario: &Scenario,
    space: &AssignmentSpace,
    entries: &[(Word, Word, f64)],
) -> Result<InfeasibilityCertificate> {
    let n_e = entries.len();
    let n_v = space.count();
    // variables: cp_e, cm_e (c = cp - cm), sp, sm (s = sp - sm),
    // vertex slacks, box slacks for cp and cm
    let n_vars = 2 * n_e + 2 + n_v + 2 * n_e;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for v in 0..n_v {
        let mut row = vec![0.0; n_vars];
        for (e, (s, q, _)) in entries.iter().enumerate() {
            if space.consistent(v, scenario, s, q) {
                row[e] = 1.0;
                row[n_e + e] = -1.0;
            }
        }
        row[2 * n_e] = -1.0; // -sp
        row[2 * n_e + 1] = 1.0; // +sm
        row[2 * n_e + 2 + v] = 1.0; // slack
        rows.push(row);
        rhs.push(0.0);
    }
    for e in 0..2 * n_e {
        let mut row = vec![0.0; n_vars];
        row[e] = 1.0;
        row[2 * n_e + 2 + n_v + e] = 1.0;
        rows.push(row);
        rhs.push(1.0);
    }
    let mut objective = vec![0.0; n_vars];
    for (e, (_, _, b)) in entries.iter().enumerate() {
        objective[e] = -b; // maximize => minimize negative
        objective[n_e + e] = *b;
    }
    objective[2 * n_e] = 1.0;
    objective[2 * n_e + 1] = -1.0;

    let lp_problem = StandardLp { objective, rows, rhs };
    let outcome = lp::solve(&lp_problem, 1e-9)?;
    let x = match outcome {
        LpOutcome::Optimal { x, .. } => x,
        other => {
            return Err(Error::Numerical(format!(
                "certificate LP did not reach an optimum: {other:?}"
            )))
        }
    };
    let mut coefficients = Vec::with_capacity(n_e);
    let mut max_abs: f64 = 0.0;
    for (e, (s, q, _)) in entries.iter().enumerate() {
        let c = x[e] - x[n_e + e];
        max_abs = max_abs.max(c.abs());
        coefficients.push(((s.clone(), q.clone()), c));
    }
    if max_abs > 1e-12 {
        for (_, c) in coefficients.iter_mut() {
            *c /= max_abs;
        }
    }
    // recompute the bound and value exactly for the normalized coefficients
    let mut deterministic_bound = f64::NEG_INFINITY;
    for v in 0..n_v {
        let mut val = 0.0;
        for ((s, q), c) in &coefficients {
            if space.consistent(v, scenario, s, q) {
                val += c;
            }
        }
        deterministic_bound = deterministic_bound.max(val);
    }
    let behavior_value = coefficients
        .iter()
        .zip(entries)
        .map(|(((_, _), c), (_, _, b))| c * b)
        .sum();
    Ok(InfeasibilityCertificate { coefficients, deterministic_bound, behavior_value })
}

/// A deterministic outcome-generation strategy: at every decision node
/// (past transcript plus current setting) one fixed outcome.
#[derive(Debug, Clone)]
pub struct DeterministicStrategy {
    /// Choice per decision node, aligned with the node table of the
    /// enumeration (transcript-ordered).
    pub choices: Vec<usize>,
}

#[derive(Debug, Clone)]
struct NodeTable {
    /// (step, transcript of (setting idx, outcome idx) pairs, setting idx).
    nodes: Vec<(usize, Vec<(usize, usize)>, usize)>,
    node_index: BTreeMap<(usize, Vec<(usize, usize)>, usize), usize>,
}

fn build_node_table(scenario: &Scenario) -> Result<NodeTable> {
    let settings = scenario.settings();
    let mut nodes = Vec::new();
    let mut node_index = BTreeMap::new();
    let mut transcripts: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    for step in 0..scenario.length() {
        let mut next = Vec::new();
        for t in &transcripts {
            for (si, s) in settings.iter().enumerate() {
                let key = (step, t.clone(), si);
                node_index.insert(key.clone(), nodes.len());
                nodes.push(key);
                for qi in 0..s.outcomes.len() {
                    let mut t2 = t.clone();
                    t2.push((si, qi));
                    next.push(t2);
                }
                if nodes.len() > ASSIGNMENT_GUARD {
                    return Err(Error::SizeGuard(format!(
                        "transcript tree exceeds {ASSIGNMENT_GUARD} nodes"
                    )));
                }
            }
        }
        transcripts = next;
    }
    Ok(NodeTable { nodes, node_index })
}

/// Complete enumeration of the deterministic strategies of a scenario
/// (the extreme points of the arrow-of-time polytope).
pub fn enumerate_deterministic_strategies(
    scenario: &Scenario,
) -> Result<Vec<DeterministicStrategy>> {
    let table = build_node_table(scenario)?;
    let settings = scenario.settings();
    let radices: Vec<usize> = table
        .nodes
        .iter()
        .map(|(_, _, si)| settings[*si].outcomes.len())
        .collect();
    let total: usize = radices.iter().try_fold(1usize, |acc, &r| {
        acc.checked_mul(r).filter(|&t| t <= STRATEGY_GUARD)
    }).ok_or_else(|| {
        Error::SizeGuard(format!("strategy count exceeds {STRATEGY_GUARD}"))
    })?;
    let mut strategies = Vec::with_capacity(total);
    let mut choices = vec![0usize; radices.len()];
    loop {
        strategies.push(DeterministicStrategy { choices: choices.clone() });
        // mixed-radix increment
        let mut pos = 0;
        loop {
            if pos == radices.len() {
                return Ok(strategies);
            }
            choices[pos] += 1;
            if choices[pos] < radices[pos] {
                break;
            }
            choices[pos] = 0;
            pos += 1;
        }
    }
}

/// Behavior induced by a deterministic strategy on a schedule of setting
/// sequences.
pub fn strategy_behavior(
    scenario: &Scenario,
    strategy: &DeterministicStrategy,
    schedule: &[Word],
) -> Result<Behavior> {
    let table = build_node_table(scenario)?;
    let settings = scenario.settings();
    let mut behavior = Behavior::empty(scenario.clone());
    for seq in schedule {
        let mut transcript: Vec<(usize, usize)> = Vec::new();
        let mut outcomes = Vec::with_capacity(seq.len());
        for (step, s) in seq.iter().enumerate() {
            let si = settings
                .iter()
                .position(|d| &d.label == s)
                .ok_or_else(|| Error::Structural(format!("unknown setting {s:?}")))?;
            let node = table.node_index[&(step, transcript.clone(), si)];
            let qi = strategy.choices[node];
            outcomes.push(settings[si].outcomes[qi].clone());
            transcript.push((si, qi));
        }
        behavior.insert_distribution(seq.clone(), vec![(outcomes, 1.0)])?;
    }
    Ok(behavior)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelClass {
    /// Global value assignments (noninvasive).
    Macrorealist,
    /// Deterministic strategies with memory of the transcript.
    ArrowOfTime,
}

#[derive(Debug, Clone)]
pub struct ClassicalBound {
    pub bound: f64,
    /// Readable description of a maximizer.
    pub maximizer: String,
}

/// Settings sequences an expression needs from a behavior.
fn expression_schedule(scenario: &Scenario, expression: &LinearExpression) -> Result<Vec<Word>> {
    let mut schedule: Vec<Word> = Vec::new();
    for (_, term) in &expression.terms {
        let word = match term {
            Term::SeqProb { settings, .. } => settings.clone(),
            Term::Correlator { positions } => expr::measure_at(scenario, positions)?,
        };
        if !schedule.contains(&word) {
            schedule.push(word);
        }
    }
    Ok(schedule)
}

/// Exact classical bound of an expression by exhaustive enumeration of the
/// chosen model class.
pub fn classical_bound(
    scenario: &Scenario,
    expression: &LinearExpression,
    class: ModelClass,
) -> Result<ClassicalBound> {
    match class {
        ModelClass::Macrorealist => {
            let space = AssignmentSpace::for_scenario(scenario);
            let n = space.count();
            if n > ASSIGNMENT_GUARD {
                return Err(Error::SizeGuard(format!(
                    "{n} assignments exceed the enumeration guard"
                )));
            }
            let schedule = expression_schedule(scenario, expression)?;
            let mut best = f64::NEG_INFINITY;
            let mut best_idx = 0;
            for v in 0..n {
                let mut value = expression.constant;
                for (coefficient, term) in &expression.terms {
                    match term {
                        Term::SeqProb { settings, outcomes } => {
                            if space.consistent(v, scenario, settings, outcomes) {
                                value += coefficient;
                            }
                        }
                        Term::Correlator { positions } => {
                            let word = expr::measure_at(scenario, positions)?;
                            let mut prod = 1.0;
                            for &pos in positions {
                                let slot = space
                                    .slot_of(pos, &word[pos])
                                    .expect("slot exists for measurement settings");
                                let q = space.digit(v, slot);
                                prod *= scenario
                                    .outcome_value(&word[pos], &space.slots[slot].2[q])?;
                            }
                            value += coefficient * prod;
                        }
                    }
                }
                if value > best {
                    best = value;
                    best_idx = v;
                }
            }
            let _ = schedule;
            Ok(ClassicalBound {
                bound: best,
                maximizer: format!("assignment {:?}", space.describe(best_idx)),
            })
        }
        ModelClass::ArrowOfTime => {
            let strategies = enumerate_deterministic_strategies(scenario)?;
            let schedule = expression_schedule(scenario, expression)?;
            let mut best = f64::NEG_INFINITY;
            let mut best_idx = 0;
            for (i, strat) in strategies.iter().enumerate() {
                let behavior = strategy_behavior(scenario, strat, &schedule)?;
                let value = expr::evaluate(expression, &behavior)?;
                if value > best {
                    best = value;
                    best_idx = i;
                }
            }
            Ok(ClassicalBound {
                bound: best,
                maximizer: format!("deterministic strategy #{best_idx}"),
            })
        }
    }
}
