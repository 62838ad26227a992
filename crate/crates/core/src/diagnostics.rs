//! Causality and disturbance diagnostics on behaviors: arrow-of-time
//! consistency, no-signaling-in-time, quantum witnesses, invasivity and
//! adroitness measures, and the ambiguous-measurement reconstruction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{self, LinearExpression};
use crate::scenario::{Behavior, Word};

/// One tested pair of sequences sharing a settings prefix.
#[derive(Debug, Clone)]
pub struct AotComparison {
    pub seq_a: Word,
    pub seq_b: Word,
    pub prefix_len: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, Default)]
pub struct AotReport {
    pub comparisons: Vec<AotComparison>,
    pub untestable: Vec<String>,
    pub max_deviation: f64,
}

impl AotReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation <= tol
    }

    pub fn violations(&self, tol: f64) -> Vec<&AotComparison> {
        self.comparisons.iter().filter(|c| c.deviation > tol).collect()
    }
}

/// Arrow-of-time check: for every pair of stored sequences agreeing on the
/// first k settings, the marginal distribution of the first k outcomes must
/// agree. Reports the maximal deviation per pair at the longest shared
/// prefix.
pub fn check_aot(behavior: &Behavior, _tol: f64) -> AotReport {
    let sequences: Vec<Word> = behavior.sequences().cloned().collect();
    let mut report = AotReport::default();
    for (i, sa) in sequences.iter().enumerate() {
        for sb in sequences.iter().skip(i + 1) {
            let k = sa.iter().zip(sb.iter()).take_while(|(a, b)| a == b).count();
            if k == 0 {
                continue;
            }
            let (ma, mb) = match (behavior.prefix_marginal(sa, k), behavior.prefix_marginal(sb, k)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    report.untestable.push(format!("pair ({sa:?}, {sb:?}): marginal unavailable"));
                    continue;
                }
            };
            let mut dev: f64 = 0.0;
            for (word, pa) in &ma {
                dev = dev.max((pa - mb.get(word).copied().unwrap_or(0.0)).abs());
            }
            for (word, pb) in &mb {
                if !ma.contains_key(word) {
                    dev = dev.max(pb.abs());
                }
            }
            report.max_deviation = report.max_deviation.max(dev);
            report.comparisons.push(AotComparison {
                seq_a: sa.clone(),
                seq_b: sb.clone(),
                prefix_len: k,
                deviation: dev,
            });
        }
    }
    report
}

/// One tested no-signaling-in-time equality.
#[derive(Debug, Clone)]
pub struct NsitCheck {
    /// Sequence with the measurement inserted at `position`.
    pub seq_with: Word,
    /// Sequence with the skip at `position`.
    pub seq_without: Word,
    pub position: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, Default)]
pub struct NsitReport {
    pub checks: Vec<NsitCheck>,
    pub untestable: Vec<String>,
    pub max_deviation: f64,
}

impl NsitReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation <= tol
    }

    /// Largest deviation among checks at one position.
    pub fn deviation_at(&self, position: usize) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.position == position)
            .map(|c| c.deviation)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
    }
}

/// No-signaling-in-time check: inserting a measurement and discarding its
/// outcome must not change later statistics. Tested at every stored skip
/// position that is followed by at least one real measurement.
pub fn check_nsit(behavior: &Behavior, _tol: f64) -> NsitReport {
    let scenario = behavior.scenario().clone();
    let mut report = NsitReport::default();
    let skip = match scenario.skip_label() {
        Some(s) => s.to_string(),
        None => {
            report.untestable.push("scenario declares no skip setting".into());
            return report;
        }
    };
    let sequences: Vec<Word> = behavior.sequences().cloned().collect();
    for seq in &sequences {
        for (i, s) in seq.iter().enumerate() {
            if s != &skip {
                continue;
            }
            // positions with no later measurement are plain AoT statements
            if !seq.iter().skip(i + 1).any(|t| t != &skip) {
                continue;
            }
            for m in scenario.measurement_settings() {
                let mut with = seq.clone();
                with[i] = m.label.clone();
                if behavior.distribution(&with).is_none() {
                    report
                        .untestable
                        .push(format!("counterpart {with:?} for {seq:?} at position {i} missing"));
                    continue;
                }
                let reduced_with = behavior.marginal_without_position(&with, i).unwrap();
                let reduced_without = behavior.marginal_without_position(seq, i).unwrap();
                let mut dev: f64 = 0.0;
                for (word, p) in &reduced_without {
                    dev = dev.max((p - reduced_with.get(word).copied().unwrap_or(0.0)).abs());
                }
                for (word, p) in &reduced_with {
                    if !reduced_without.contains_key(word) {
                        dev = dev.max(p.abs());
                    }
                }
                report.max_deviation = report.max_deviation.max(dev);
                report.checks.push(NsitCheck {
                    seq_with: with,
                    seq_without: seq.clone(),
                    position: i,
                    deviation: dev,
                });
            }
        }
    }
    report
}

/// Two-step quantum witness at one position: W = |p(q*) - Σ_{q_i} p(q_i, q*)|.
///
/// `q_star` fixes the outcomes at every position other than `position`
/// (its entry at `position` is ignored); the settings measure everywhere
/// except that the witnessed position is measured in one run and skipped in
/// the other.
pub fn quantum_witness(behavior: &Behavior, position: usize, q_star: &Word) -> Result<f64> {
    let scenario = behavior.scenario();
    let n = scenario.length();
    if q_star.len() != n || position >= n {
        return Err(Error::Structural("witness outcome word does not fit the scenario".into()));
    }
    let skip = scenario
        .skip_label()
        .ok_or_else(|| Error::Structural("quantum witness needs a skip-style scenario".into()))?
        .to_string();
    let measurement: Vec<&str> = scenario.measurement_settings().map(|s| s.label.as_str()).collect();
    if measurement.len() != 1 {
        return Err(Error::Structural("quantum witness needs a unique measurement setting".into()));
    }
    let m = measurement[0].to_string();
    let skip_outcome = scenario.setting(&skip).unwrap().outcomes[0].clone();

    let mut s_without = vec![m.clone(); n];
    s_without[position] = skip.clone();
    let mut q_without = q_star.clone();
    q_without[position] = skip_outcome;
    let p_unmeasured = behavior.prob(&s_without, &q_without)?;

    let s_with = vec![m.clone(); n];
    let outcomes = scenario.setting(&m).unwrap().outcomes.clone();
    let mut summed = 0.0;
    for q in &outcomes {
        let mut word = q_star.clone();
        word[position] = q.clone();
        summed += behavior.prob(&s_with, &word)?;
    }
    Ok((p_unmeasured - summed).abs())
}

#[derive(Debug, Clone)]
pub struct RobensWitness {
    pub value: f64,
    /// Macrorealist models obey value <= 0.
    pub mr_bound: f64,
}

/// Signed witness comparing the mean of the final outcome with and without
/// the intermediate measurement:
/// W = Σ q₂ p(q₁ q₂ | measure, measure) - Σ q₂ p(0 q₂ | skip, measure).
pub fn robens_witness(behavior: &Behavior) -> Result<RobensWitness> {
    let scenario = behavior.scenario();
    if scenario.length() != 2 {
        return Err(Error::Structural("the witness is defined on two-step behaviors".into()));
    }
    let with = expr::measure_at(scenario, &[0, 1])?;
    let without = expr::measure_at(scenario, &[1])?;
    let mean_with = behavior.mean(&with, 1)?;
    let mean_without = behavior.mean(&without, 1)?;
    Ok(RobensWitness { value: mean_with - mean_without, mr_bound: 0.0 })
}

/// Invasivity per outcome: I(q) = |1 - p(q|q)| from a control behavior that
/// repeats the same measurement twice. Outcomes that never occur at the
/// first step are reported as untestable.
#[derive(Debug, Clone)]
pub struct InvasivityReport {
    pub per_outcome: BTreeMap<String, f64>,
    pub untestable: Vec<String>,
}

pub fn invasivity(control: &Behavior) -> Result<InvasivityReport> {
    let scenario = control.scenario();
    if scenario.length() != 2 {
        return Err(Error::Structural("invasivity needs a two-step control behavior".into()));
    }
    let settings = expr::measure_at(scenario, &[0, 1])?;
    let dist = control
        .distribution(&settings)
        .ok_or_else(|| Error::MissingData(format!("no distribution for s={settings:?}")))?;
    let outcomes = scenario.setting(&settings[0]).unwrap().outcomes.clone();
    let mut report = InvasivityReport { per_outcome: BTreeMap::new(), untestable: Vec::new() };
    for q in &outcomes {
        let first: f64 = dist
            .iter()
            .filter(|(word, _)| &word[0] == q)
            .map(|(_, p)| p)
            .sum();
        if first <= 1e-12 {
            report.untestable.push(format!("outcome {q:?} never occurs at the first step"));
            continue;
        }
        let same = dist.get(&vec![q.clone(), q.clone()]).copied().unwrap_or(0.0);
        report.per_outcome.insert(q.clone(), (1.0 - same / first).abs());
    }
    Ok(report)
}

/// |evaluate(target, with) - evaluate(target, without)|: the disturbance a
/// single intermediate operation causes on a target functional.
pub fn adroitness_deviation(
    with: &Behavior,
    without: &Behavior,
    target: &LinearExpression,
) -> Result<f64> {
    Ok((expr::evaluate(target, with)? - expr::evaluate(target, without)?).abs())
}

/// Reconstructed quasiprobabilities from ambiguous three-outcome statistics
/// p_A(q̄) = p(system is not in q):
/// p(q) = ½ [ p_A(q̄') + p_A(q̄'') - p_A(q̄) ].
#[derive(Debug, Clone)]
pub struct EimReconstruction {
    pub quasiprob: BTreeMap<String, f64>,
    pub has_negative: bool,
}

pub fn eim_reconstruct(ambiguous: &BTreeMap<String, f64>) -> Result<EimReconstruction> {
    if ambiguous.len() != 3 {
        return Err(Error::Structural(format!(
            "the reconstruction identity needs exactly 3 outcomes, got {}",
            ambiguous.len()
        )));
    }
    for (q, p) in ambiguous {
        if !(0.0..=1.0 + 1e-12).contains(p) {
            return Err(Error::Invariant(format!("ambiguous statistic for {q:?} outside [0,1]: {p}")));
        }
    }
    let labels: Vec<&String> = ambiguous.keys().collect();
    let mut quasiprob = BTreeMap::new();
    let mut has_negative = false;
    for i in 0..3 {
        let own = ambiguous[labels[i]];
        let others: f64 = (0..3).filter(|&j| j != i).map(|j| ambiguous[labels[j]]).sum();
        let p = 0.5 * (others - own);
        if p < -1e-12 {
            has_negative = true;
        }
        quasiprob.insert(labels[i].clone(), p);
    }
    Ok(EimReconstruction { quasiprob, has_negative })
}

/// Joint reconstruction in the first slot: for each later outcome q₂, apply
/// the three-outcome identity to { p_A(q̄₁, q₂) }_{q₁}.
pub fn eim_reconstruct_joint(
    ambiguous_joint: &BTreeMap<(String, String), f64>,
) -> Result<BTreeMap<(String, String), f64>> {
    let mut by_second: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ((q1, q2), p) in ambiguous_joint {
        by_second.entry(q2.clone()).or_default().insert(q1.clone(), *p);
    }
    let mut joint = BTreeMap::new();
    for (q2, slice) in &by_second {
        if slice.len() != 3 {
            return Err(Error::Structural(format!(
                "ambiguous joint needs 3 first-slot outcomes for q2={q2:?}, got {}",
                slice.len()
            )));
        }
        let labels: Vec<&String> = slice.keys().collect();
        for i in 0..3 {
            let own = slice[labels[i]];
            let others: f64 = (0..3).filter(|&j| j != i).map(|j| slice[labels[j]]).sum();
            joint.insert((labels[i].clone(), q2.clone()), 0.5 * (others - own));
        }
    }
    Ok(joint)
}

/// NSIT deviation per later outcome, estimated through the ambiguous
/// measurement: δ_A(q₂) = p(q₂) - Σ_{q₁} p_A(q₁, q₂).
pub fn eim_delta(
    behavior: &Behavior,
    ambiguous_joint: &BTreeMap<(String, String), f64>,
) -> Result<BTreeMap<String, f64>> {
    let scenario = behavior.scenario();
    if scenario.length() != 2 {
        return Err(Error::Structural("the EIM correction is defined on two-step behaviors".into()));
    }
    let joint = eim_reconstruct_joint(ambiguous_joint)?;
    let without = expr::measure_at(scenario, &[1])?;
    let skip_outcome = scenario.setting(&without[0]).unwrap().outcomes[0].clone();
    let mut deltas = BTreeMap::new();
    let finals: Vec<String> = joint.keys().map(|(_, q2)| q2.clone()).collect();
    for q2 in finals {
        if deltas.contains_key(&q2) {
            continue;
        }
        let p2 = behavior.prob(&without, &vec![skip_outcome.clone(), q2.clone()])?;
        let summed: f64 = joint
            .iter()
            .filter(|((_, b), _)| b == &q2)
            .map(|(_, p)| p)
            .sum();
        deltas.insert(q2, p2 - summed);
    }
    Ok(deltas)
}

/// Left-hand side and corrected bound of the equivalently-invasive
/// three-term inequality:
/// ⟨Q₁⟩ + ⟨Q₁Q₂⟩ - ⟨Q₂⟩ <= 1 + Σ_{q₂} |δ_A(q₂)|.
pub fn eim_corrected_lgi(
    behavior: &Behavior,
    ambiguous_joint: &BTreeMap<(String, String), f64>,
) -> Result<(f64, f64)> {
    let scenario = behavior.scenario();
    let first_only = expr::measure_at(scenario, &[0])?;
    let both = expr::measure_at(scenario, &[0, 1])?;
    let second_only = expr::measure_at(scenario, &[1])?;
    let lhs = behavior.mean(&first_only, 0)? + behavior.correlator(&both, &[0, 1])?
        - behavior.mean(&second_only, 1)?;
    let deltas = eim_delta(behavior, ambiguous_joint)?;
    let bound = 1.0 + deltas.values().map(|d| d.abs()).sum::<f64>();
    Ok((lhs, bound))
}
