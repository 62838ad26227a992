//! Word algebra of projective-measurement symbols.
//!
//! A symbol is a reduced projector Π_{q|s} (the last outcome of every
//! setting is eliminated through completeness and never appears). Words
//! multiply by concatenation and canonicalize with two rewrite rules:
//! adjacent equal symbols collapse (idempotence) and adjacent symbols of
//! the same setting with different outcomes annihilate (orthogonality).

use std::collections::BTreeMap;

/// Reduced projector symbol: (setting index, outcome index).
pub type Symbol = (u16, u16);

/// A canonical word, or the zero operator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CanonWord {
    Zero,
    Word(Vec<Symbol>),
}

impl CanonWord {
    pub fn empty() -> Self {
        CanonWord::Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        match self {
            CanonWord::Zero => 0,
            CanonWord::Word(w) => w.len(),
        }
    }

    pub fn is_empty_word(&self) -> bool {
        matches!(self, CanonWord::Word(w) if w.is_empty())
    }
}

/// Canonicalize a concatenation of symbols.
pub fn canonicalize(symbols: &[Symbol]) -> CanonWord {
    let mut stack: Vec<Symbol> = Vec::with_capacity(symbols.len());
    for &s in symbols {
        match stack.last() {
            Some(&top) if top == s => {}
            Some(&top) if top.0 == s.0 => return CanonWord::Zero,
            _ => stack.push(s),
        }
    }
    CanonWord::Word(stack)
}

/// Product of two canonical words.
pub fn multiply(a: &CanonWord, b: &CanonWord) -> CanonWord {
    match (a, b) {
        (CanonWord::Zero, _) | (_, CanonWord::Zero) => CanonWord::Zero,
        (CanonWord::Word(x), CanonWord::Word(y)) => {
            let mut joined = x.clone();
            joined.extend_from_slice(y);
            canonicalize(&joined)
        }
    }
}

/// Adjoint of a word: projectors are self-adjoint, so reverse the order.
pub fn adjoint(a: &CanonWord) -> CanonWord {
    match a {
        CanonWord::Zero => CanonWord::Zero,
        CanonWord::Word(w) => {
            let mut r = w.clone();
            r.reverse();
            CanonWord::Word(r)
        }
    }
}

/// Real linear combination of canonical words (the empty word is the
/// identity operator).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordPoly {
    pub terms: BTreeMap<Vec<Symbol>, f64>,
}

impl WordPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Vec::new(), 1.0);
        Self { terms }
    }

    pub fn symbol(s: Symbol) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![s], 1.0);
        Self { terms }
    }

    pub fn add_term(&mut self, word: CanonWord, coefficient: f64) {
        if let CanonWord::Word(w) = word {
            let entry = self.terms.entry(w.clone()).or_insert(0.0);
            *entry += coefficient;
            if entry.abs() < 1e-15 {
                self.terms.remove(&w);
            }
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                let mut joined = wa.clone();
                joined.extend_from_slice(wb);
                out.add_term(canonicalize(&joined), ca * cb);
            }
        }
        out
    }
}

/// Projector Π_{q|s} of a setting with `n_outcomes` outcomes as a
/// word polynomial: reduced outcomes are single symbols, the eliminated
/// last outcome expands through completeness.
pub fn projector_poly(setting: u16, outcome: u16, n_outcomes: u16) -> WordPoly {
    if outcome + 1 < n_outcomes {
        WordPoly::symbol((setting, outcome))
    } else {
        let mut poly = WordPoly::one();
        for q in 0..n_outcomes - 1 {
            poly.add_term(CanonWord::Word(vec![(setting, q)]), -1.0);
        }
        poly
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn idempotence_collapses() {
        let w = canonicalize(&[(0, 0), (0, 0)]);
        assert_eq!(w, CanonWord::Word(vec![(0, 0)]));
    }

    #[test]
    fn orthogonality_annihilates() {
        // same setting, different outcomes
        let w = canonicalize(&[(0, 0), (0, 1)]);
        assert_eq!(w, CanonWord::Zero);
    }

    #[test]
    fn cascading_collapse() {
        // [a, b, b, a] -> [a, b, a] (idempotence does not merge across b)
        let w = canonicalize(&[(0, 0), (1, 0), (1, 0), (0, 0)]);
        assert_eq!(w, CanonWord::Word(vec![(0, 0), (1, 0), (0, 0)]));
        // [a, b, b'] with b, b' same setting -> zero
        let w = canonicalize(&[(0, 0), (1, 0), (1, 1)]);
        assert_eq!(w, CanonWord::Zero);
    }

    #[test]
    fn completeness_expansion() {
        // binary setting: eliminated outcome is 1 - Π_0
        let p = projector_poly(2, 1, 2);
        assert_eq!(p.terms.len(), 2);
        assert_eq!(p.terms[&Vec::new()], 1.0);
        assert_eq!(p.terms[&vec![(2u16, 0u16)]], -1.0);
        // resolution of identity: Π_0 + Π_1 = 1
        let mut sum = projector_poly(2, 0, 2);
        for (w, c) in projector_poly(2, 1, 2).terms {
            sum.add_term(CanonWord::Word(w), c);
        }
        assert_eq!(sum, WordPoly::one());
    }

    #[test]
    fn poly_multiplication_respects_idempotence() {
        let p = WordPoly::symbol((0, 0));
        let sq = p.mul(&p);
        assert_eq!(sq, p);
        // orthogonal product is the zero polynomial
        let q = WordPoly::symbol((0, 1));
        assert!(p.mul(&q).terms.is_empty());
    }

    proptest! {
        /// canonicalization is idempotent on random symbol strings
        #[test]
        fn canonicalization_idempotent(raw in proptest::collection::vec((0u16..3, 0u16..2), 0..12)) {
            match canonicalize(&raw) {
                CanonWord::Zero => {}
                CanonWord::Word(w) => {
                    prop_assert_eq!(canonicalize(&w), CanonWord::Word(w.clone()));
                }
            }
        }

        /// multiplication is associative
        #[test]
        fn multiplication_associative(
            a in proptest::collection::vec((0u16..3, 0u16..2), 0..6),
            b in proptest::collection::vec((0u16..3, 0u16..2), 0..6),
            c in proptest::collection::vec((0u16..3, 0u16..2), 0..6),
        ) {
            let (wa, wb, wc) = (canonicalize(&a), canonicalize(&b), canonicalize(&c));
            let left = multiply(&multiply(&wa, &wb), &wc);
            let right = multiply(&wa, &multiply(&wb, &wc));
            prop_assert_eq!(left, right);
        }
    }
}
