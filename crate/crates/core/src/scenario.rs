//! Measurement scenarios and behaviors.
//!
//! A scenario declares the sequence length, the setting alphabet, the
//! outcome alphabet of each setting and optional numeric outcome values
//! (for correlators). A behavior is a table of conditional distributions
//! p(q⃗|s⃗) over that scenario.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// One measurement setting: label, ordered outcomes, optional real values.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingDef {
    pub label: String,
    pub outcomes: Vec<String>,
    pub values: Option<Vec<f64>>,
}

impl SettingDef {
    pub fn value_of(&self, outcome: &str) -> Option<f64> {
        let idx = self.outcomes.iter().position(|o| o == outcome)?;
        self.values.as_ref().map(|v| v[idx])
    }
}

/// Declared measurement scenario: `length` steps, a common setting alphabet
/// per step, and an optional conventional no-measurement setting (which
/// must have exactly one outcome, reported with probability 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    length: usize,
    settings: Vec<SettingDef>,
    skip: Option<usize>,
}

impl Scenario {
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn settings(&self) -> &[SettingDef] {
        &self.settings
    }

    pub fn setting(&self, label: &str) -> Option<&SettingDef> {
        self.settings.iter().find(|s| s.label == label)
    }

    pub fn skip_label(&self) -> Option<&str> {
        self.skip.map(|i| self.settings[i].label.as_str())
    }

    pub fn is_skip(&self, label: &str) -> bool {
        self.skip_label() == Some(label)
    }

    /// Settings that represent actual measurements (skip excluded).
    pub fn measurement_settings(&self) -> impl Iterator<Item = &SettingDef> {
        let skip = self.skip;
        self.settings
            .iter()
            .enumerate()
            .filter(move |(i, _)| Some(*i) != skip)
            .map(|(_, s)| s)
    }

    pub fn outcome_value(&self, setting: &str, outcome: &str) -> Result<f64> {
        let def = self
            .setting(setting)
            .ok_or_else(|| Error::Structural(format!("unknown setting {setting:?}")))?;
        def.value_of(outcome).ok_or_else(|| {
            Error::MissingData(format!("no outcome value declared for ({setting:?}, {outcome:?})"))
        })
    }

    fn check_word(&self, settings: &[String], outcomes: &[String]) -> Result<()> {
        if settings.len() != self.length || outcomes.len() != self.length {
            return Err(Error::Structural(format!(
                "word length {} does not match scenario length {}",
                settings.len().max(outcomes.len()),
                self.length
            )));
        }
        for (s, q) in settings.iter().zip(outcomes) {
            let def = self
                .setting(s)
                .ok_or_else(|| Error::Structural(format!("unknown setting {s:?}")))?;
            if !def.outcomes.contains(q) {
                return Err(Error::Structural(format!("setting {s:?} has no outcome {q:?}")));
            }
        }
        Ok(())
    }
}

pub struct ScenarioBuilder {
    length: usize,
    settings: Vec<SettingDef>,
    skip: Option<String>,
}

impl ScenarioBuilder {
    pub fn new(length: usize) -> Self {
        Self { length, settings: Vec::new(), skip: None }
    }

    /// Standard Leggett-Garg scenario: setting "0" skips, setting "1"
    /// measures a dichotomic quantity with outcomes "+"/"-" valued ±1.
    pub fn leggett_garg(length: usize) -> Self {
        Self::new(length)
            .setting("0", &["0"], None)
            .setting("1", &["+", "-"], Some(&[1.0, -1.0]))
            .skip_setting("0")
    }

    /// Two real inputs, binary outputs, no skip convention (the automaton
    /// dimension-witness scenario).
    pub fn two_input_binary(length: usize) -> Self {
        Self::new(length)
            .setting("0", &["0", "1"], None)
            .setting("1", &["0", "1"], None)
    }

    pub fn setting(mut self, label: &str, outcomes: &[&str], values: Option<&[f64]>) -> Self {
        self.settings.push(SettingDef {
            label: label.to_string(),
            outcomes: outcomes.iter().map(|o| o.to_string()).collect(),
            values: values.map(|v| v.to_vec()),
        });
        self
    }

    pub fn skip_setting(mut self, label: &str) -> Self {
        self.skip = Some(label.to_string());
        self
    }

    pub fn build(self) -> Result<Scenario> {
        if self.length == 0 {
            return Err(Error::Structural("scenario length must be positive".into()));
        }
        if self.settings.is_empty() {
            return Err(Error::Structural("scenario needs at least one setting".into()));
        }
        let mut labels: Vec<&str> = self.settings.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.settings.len() {
            return Err(Error::Structural("duplicate setting labels".into()));
        }
        for s in &self.settings {
            if s.outcomes.is_empty() {
                return Err(Error::Structural(format!("setting {:?} has no outcomes", s.label)));
            }
            if let Some(v) = &s.values {
                if v.len() != s.outcomes.len() {
                    return Err(Error::Structural(format!(
                        "setting {:?} declares {} values for {} outcomes",
                        s.label,
                        v.len(),
                        s.outcomes.len()
                    )));
                }
            }
        }
        let skip = match &self.skip {
            None => None,
            Some(label) => {
                let idx = self
                    .settings
                    .iter()
                    .position(|s| &s.label == label)
                    .ok_or_else(|| Error::Structural(format!("skip setting {label:?} not declared")))?;
                if self.settings[idx].outcomes.len() != 1 {
                    return Err(Error::Structural(
                        "the no-measurement setting must have exactly one outcome".into(),
                    ));
                }
                Some(idx)
            }
        };
        Ok(Scenario { length: self.length, settings: self.settings, skip })
    }
}

pub type Word = Vec<String>;
pub type Distribution = BTreeMap<Word, f64>;

/// Table of conditional sequence distributions p(q⃗|s⃗).
#[derive(Debug, Clone)]
pub struct Behavior {
    scenario: Scenario,
    table: BTreeMap<Word, Distribution>,
}

impl Behavior {
    pub fn empty(scenario: Scenario) -> Self {
        Self { scenario, table: BTreeMap::new() }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn sequences(&self) -> impl Iterator<Item = &Word> {
        self.table.keys()
    }

    pub fn distribution(&self, settings: &[String]) -> Option<&Distribution> {
        self.table.get(settings)
    }

    pub fn prob(&self, settings: &[String], outcomes: &[String]) -> Result<f64> {
        self.table
            .get(settings)
            .and_then(|d| d.get(outcomes).copied())
            .ok_or_else(|| {
                Error::MissingData(format!("behavior has no entry for (s={settings:?}, q={outcomes:?})"))
            })
    }

    /// Insert a full outcome distribution for one setting sequence.
    /// The distribution must be nonnegative and normalized within 1e-9;
    /// tiny negative round-off is clamped to zero.
    pub fn insert_distribution(
        &mut self,
        settings: Word,
        dist: Vec<(Word, f64)>,
    ) -> Result<()> {
        let mut total = 0.0;
        let mut map = Distribution::new();
        for (outcomes, p) in dist {
            self.scenario.check_word(&settings, &outcomes)?;
            if p < -1e-9 {
                return Err(Error::Invariant(format!(
                    "negative probability {p:.3e} for (s={settings:?}, q={outcomes:?})"
                )));
            }
            total += p;
            *map.entry(outcomes).or_insert(0.0) += p.max(0.0);
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant(format!(
                "distribution for s={settings:?} sums to {total} (expected 1)"
            )));
        }
        self.table.insert(settings, map);
        Ok(())
    }

    /// Marginal distribution of the first `k` outcomes of one sequence.
    pub fn prefix_marginal(&self, settings: &[String], k: usize) -> Result<Distribution> {
        let dist = self
            .table
            .get(settings)
            .ok_or_else(|| Error::MissingData(format!("no distribution for s={settings:?}")))?;
        let mut out = Distribution::new();
        for (word, p) in dist {
            *out.entry(word[..k].to_vec()).or_insert(0.0) += p;
        }
        Ok(out)
    }

    /// Marginal over the outcome at one position: maps each outcome word
    /// with position `i` removed to the summed probability.
    pub fn marginal_without_position(&self, settings: &[String], i: usize) -> Result<Distribution> {
        let dist = self
            .table
            .get(settings)
            .ok_or_else(|| Error::MissingData(format!("no distribution for s={settings:?}")))?;
        let mut out = Distribution::new();
        for (word, p) in dist {
            let mut reduced = word.clone();
            reduced.remove(i);
            *out.entry(reduced).or_insert(0.0) += p;
        }
        Ok(out)
    }

    /// Correlator of the outcome values at the given positions:
    /// sum over q⃗ of Π_k value(q_{pos_k}) · p(q⃗|s⃗).
    pub fn correlator(&self, settings: &[String], positions: &[usize]) -> Result<f64> {
        let dist = self
            .table
            .get(settings)
            .ok_or_else(|| Error::MissingData(format!("no distribution for s={settings:?}")))?;
        let mut total = 0.0;
        for (word, p) in dist {
            let mut weight = 1.0;
            for &pos in positions {
                weight *= self.scenario.outcome_value(&settings[pos], &word[pos])?;
            }
            total += weight * p;
        }
        Ok(total)
    }

    /// Expected outcome value at a single position.
    pub fn mean(&self, settings: &[String], position: usize) -> Result<f64> {
        self.correlator(settings, &[position])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lg3() -> Scenario {
        ScenarioBuilder::leggett_garg(3).build().unwrap()
    }

    #[test]
    fn skip_setting_must_be_trivial() {
        let bad = ScenarioBuilder::new(2)
            .setting("0", &["a", "b"], None)
            .skip_setting("0")
            .build();
        assert!(bad.is_err());
    }

    #[test]
    fn insert_checks_normalization() {
        let mut b = Behavior::empty(lg3());
        let s: Word = vec!["1".into(), "1".into(), "0".into()];
        let bad = b.insert_distribution(
            s.clone(),
            vec![(vec!["+".into(), "+".into(), "0".into()], 0.7)],
        );
        assert!(bad.is_err());
        let ok = b.insert_distribution(
            s.clone(),
            vec![
                (vec!["+".into(), "+".into(), "0".into()], 0.7),
                (vec!["-".into(), "-".into(), "0".into()], 0.3),
            ],
        );
        assert!(ok.is_ok());
        assert_eq!(b.prob(&s, &["+".into(), "+".into(), "0".into()]).unwrap(), 0.7);
    }

    #[test]
    fn insert_rejects_unknown_labels() {
        let mut b = Behavior::empty(lg3());
        let bad = b.insert_distribution(
            vec!["1".into(), "7".into(), "0".into()],
            vec![(vec!["+".into(), "+".into(), "0".into()], 1.0)],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn correlator_and_marginals() {
        let mut b = Behavior::empty(lg3());
        let s: Word = vec!["1".into(), "1".into(), "0".into()];
        b.insert_distribution(
            s.clone(),
            vec![
                (vec!["+".into(), "-".into(), "0".into()], 0.25),
                (vec!["-".into(), "+".into(), "0".into()], 0.25),
                (vec!["+".into(), "+".into(), "0".into()], 0.5),
            ],
        )
        .unwrap();
        assert!((b.correlator(&s, &[0, 1]).unwrap() - 0.0).abs() < 1e-12);
        assert!((b.mean(&s, 0).unwrap() - 0.5).abs() < 1e-12);
        let pm = b.prefix_marginal(&s, 1).unwrap();
        assert!((pm[&vec!["+".to_string()]] - 0.75).abs() < 1e-12);
        let mw = b.marginal_without_position(&s, 0).unwrap();
        assert!((mw[&vec!["+".to_string(), "0".to_string()]] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn missing_entry_is_named() {
        let b = Behavior::empty(lg3());
        let err = b
            .prob(&["1".into(), "1".into(), "0".into()], &["+".into(), "+".into(), "0".into()])
            .unwrap_err();
        assert!(matches!(err, Error::MissingData(_)));
    }
}
