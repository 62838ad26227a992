//! Linear expressions over behaviors: raw sequence probabilities,
//! correlators of outcome values, and the library of Leggett-Garg
//! inequalities.

use crate::error::{Error, Result};
use crate::scenario::{Behavior, Scenario, Word};

/// One term of a linear expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// p(q⃗|s⃗) looked up directly.
    SeqProb { settings: Word, outcomes: Word },
    /// Product of declared outcome values at the given measured positions.
    /// In a skip-style scenario this measures exactly at those positions.
    Correlator { positions: Vec<usize> },
}

/// Direction of the macrorealist bound attached to an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    UpperBound,
    LowerBound,
}

#[derive(Debug, Clone)]
pub struct LinearExpression {
    pub name: String,
    pub terms: Vec<(f64, Term)>,
    pub constant: f64,
    pub classical_bound: Option<f64>,
    pub quantum_bound: Option<f64>,
    pub bound_kind: BoundKind,
}

impl LinearExpression {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            terms: Vec::new(),
            constant: 0.0,
            classical_bound: None,
            quantum_bound: None,
            bound_kind: BoundKind::UpperBound,
        }
    }

    pub fn push(&mut self, coefficient: f64, term: Term) {
        self.terms.push((coefficient, term));
    }

    /// α·self + β·other (term lists concatenated; bounds dropped).
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        let mut out = Self::new(format!("{}*{} + {}*{}", alpha, self.name, beta, other.name));
        for (c, t) in &self.terms {
            out.push(alpha * c, t.clone());
        }
        for (c, t) in &other.terms {
            out.push(beta * c, t.clone());
        }
        out.constant = alpha * self.constant + beta * other.constant;
        out
    }

    /// Largest time index referenced by any correlator term.
    pub fn max_position(&self) -> usize {
        self.terms
            .iter()
            .filter_map(|(_, t)| match t {
                Term::Correlator { positions } => positions.iter().max().copied(),
                Term::SeqProb { settings, .. } => Some(settings.len().saturating_sub(1)),
            })
            .max()
            .unwrap_or(0)
    }
}

/// Settings word that measures exactly at `positions` in a skip-style
/// scenario with a unique measurement setting.
pub fn measure_at(scenario: &Scenario, positions: &[usize]) -> Result<Word> {
    let skip = scenario
        .skip_label()
        .ok_or_else(|| Error::Structural("correlator terms need a skip-style scenario".into()))?
        .to_string();
    let measurement: Vec<&str> =
        scenario.measurement_settings().map(|s| s.label.as_str()).collect();
    if measurement.len() != 1 {
        return Err(Error::Structural(
            "correlator terms need a unique measurement setting".into(),
        ));
    }
    let mut word = vec![skip; scenario.length()];
    for &p in positions {
        if p >= scenario.length() {
            return Err(Error::Structural(format!(
                "correlator position {p} outside scenario of length {}",
                scenario.length()
            )));
        }
        word[p] = measurement[0].to_string();
    }
    Ok(word)
}

/// Evaluate an expression on a behavior. Fails (naming the entry) if a
/// referenced distribution is absent.
pub fn evaluate(expr: &LinearExpression, behavior: &Behavior) -> Result<f64> {
    let mut total = expr.constant;
    for (coefficient, term) in &expr.terms {
        let value = match term {
            Term::SeqProb { settings, outcomes } => behavior.prob(settings, outcomes)?,
            Term::Correlator { positions } => {
                let settings = measure_at(behavior.scenario(), positions)?;
                behavior.correlator(&settings, positions)?
            }
        };
        total += coefficient * value;
    }
    Ok(total)
}

/// N-term Leggett-Garg inequality over N measurement times:
/// sum of adjacent correlators minus the end-to-end correlator, bounded by
/// N-2 for macrorealist models and N·cos(π/N) for projective quantum
/// strategies.
pub fn lgi_n(n: usize) -> Result<LinearExpression> {
    if n < 3 {
        return Err(Error::Structural("the chained LGI needs at least 3 times".into()));
    }
    let mut expr = LinearExpression::new(format!("lgi{n}"));
    for k in 0..n - 1 {
        expr.push(1.0, Term::Correlator { positions: vec![k, k + 1] });
    }
    expr.push(-1.0, Term::Correlator { positions: vec![0, n - 1] });
    expr.classical_bound = Some((n - 2) as f64);
    expr.quantum_bound = Some(n as f64 * (std::f64::consts::PI / n as f64).cos());
    Ok(expr)
}

pub fn lgi3() -> LinearExpression {
    lgi_n(3).unwrap()
}

pub fn lgi4() -> LinearExpression {
    lgi_n(4).unwrap()
}

/// Stationary two-time inequality C(2t) - 2 C(t) >= -1 (minus branch),
/// phrased over a three-time scenario: C(t) pairs steps (0,1), C(2t) pairs
/// steps (0,2).
pub fn lgi_stationary() -> LinearExpression {
    let mut expr = LinearExpression::new("lgi_stationary");
    expr.push(1.0, Term::Correlator { positions: vec![0, 2] });
    expr.push(-2.0, Term::Correlator { positions: vec![0, 1] });
    expr.classical_bound = Some(-1.0);
    expr.bound_kind = BoundKind::LowerBound;
    expr
}

/// Single-bit dimension witness: p(01|00) + p(10|10) + p(10|11) over two
/// inputs and two steps. Classical one-bit machines reach 9/4, a single
/// qubit about 2.3557.
pub fn eq_dimension_witness() -> LinearExpression {
    let seq = |s: [&str; 2], q: [&str; 2]| Term::SeqProb {
        settings: vec![s[0].into(), s[1].into()],
        outcomes: vec![q[0].into(), q[1].into()],
    };
    let mut expr = LinearExpression::new("single_bit_witness");
    expr.push(1.0, seq(["0", "0"], ["0", "1"]));
    expr.push(1.0, seq(["1", "0"], ["1", "0"]));
    expr.push(1.0, seq(["1", "1"], ["1", "0"]));
    expr.classical_bound = Some(2.25);
    expr.quantum_bound = Some(2.35570);
    expr
}
