//! Belief-scored vocabulary with learn-and-forget updates.
//!
//! Each (main concept, word) entry keeps a distribution over the main concept's
//! sub-concepts and an update count `l`. One observation of sub-concept `s`
//! increments `l`, then
//!
//! ```text
//! B(s)  <- B(s)  * (l-1)/l + 1/l      (increase belief)
//! B(s') <- B(s') * (l-1)/l            (decrease belief, every sibling s' != s)
//! ```
//!
//! so the distribution stays normalized and equals the empirical frequency of
//! observations. A word first taught wrongly is forgotten once the correct
//! sub-concept outnumbers it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{normalize_word, KbError, Ontology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefEntry {
    pub dist: BTreeMap<String, f64>,
    pub l: u64,
}

impl BeliefEntry {
    pub fn belief(&self, sc: &str) -> f64 {
        self.dist.get(sc).copied().unwrap_or(0.0)
    }

    /// Argmax with ties going to the lexicographically first sub-concept.
    pub fn argmax(&self) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (sc, &b) in &self.dist {
            if best.is_none_or(|(_, bb)| b > bb) {
                best = Some((sc, b));
            }
        }
        best.map(|(sc, _)| sc)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeliefTable {
    pub(crate) ontology: Ontology,
    pub(crate) entries: BTreeMap<String, BTreeMap<String, BeliefEntry>>,
}

fn increase_belief(b: f64, l: u64) -> f64 {
    let l = l as f64;
    b * ((l - 1.0) / l) + 1.0 / l
}

fn decrease_belief(b: f64, l: u64) -> f64 {
    let l = l as f64;
    b * ((l - 1.0) / l)
}

impl BeliefTable {
    pub fn new(ontology: Ontology) -> Self {
        Self { ontology, entries: BTreeMap::new() }
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn entry(&self, mc: &str, word: &str) -> Option<&BeliefEntry> {
        self.entries.get(mc)?.get(&normalize_word(word))
    }

    pub fn belief(&self, mc: &str, sc: &str, word: &str) -> f64 {
        self.entry(mc, word).map_or(0.0, |e| e.belief(sc))
    }

    /// Whether the (mc, sc, word) triplet carries any belief.
    pub fn is_in_kb(&self, mc: &str, sc: &str, word: &str) -> bool {
        self.belief(mc, sc, word) > 0.0
    }

    pub fn infer(&self, mc: &str, word: &str) -> Result<Option<&str>, KbError> {
        self.ontology.sub_concepts(mc)?;
        Ok(self.entry(mc, word).and_then(BeliefEntry::argmax))
    }

    /// Applies one round of increase/decrease updates toward `chosen`.
    pub fn observe(&mut self, mc: &str, word: &str, chosen: &str) -> Result<(), KbError> {
        self.ontology.check(mc, chosen)?;
        let subs = self.ontology.sub_concepts(mc)?.clone();
        let entry = self
            .entries
            .entry(mc.to_string())
            .or_default()
            .entry(normalize_word(word))
            .or_insert_with(|| BeliefEntry {
                dist: subs.iter().map(|s| (s.clone(), 0.0)).collect(),
                l: 0,
            });
        // sub-concepts registered after the entry was created start at zero
        for s in &subs {
            entry.dist.entry(s.clone()).or_insert(0.0);
        }
        entry.l += 1;
        let l = entry.l;
        for (sc, b) in entry.dist.iter_mut() {
            *b = if sc == chosen { increase_belief(*b, l) } else { decrease_belief(*b, l) };
        }
        Ok(())
    }

    /// Adds a new triplet with its initial belief, which is exactly the first observation.
    pub fn add(&mut self, mc: &str, word: &str, sc: &str) -> Result<(), KbError> {
        self.observe(mc, word, sc)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
