use std::collections::BTreeMap;

use super::{normalize_word, KbError, Ontology};

/// First-write-wins vocabulary map. Nothing is ever overwritten or forgotten.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NaiveKb {
    pub(crate) ontology: Ontology,
    pub(crate) map: BTreeMap<String, BTreeMap<String, String>>,
}

impl NaiveKb {
    pub fn new(ontology: Ontology) -> Self {
        Self { ontology, map: BTreeMap::new() }
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    /// Whether the word is mapped under any main concept.
    pub fn is_in_kb(&self, word: &str) -> bool {
        let w = normalize_word(word);
        self.map.values().any(|m| m.contains_key(&w))
    }

    pub fn infer(&self, mc: &str, word: &str) -> Result<Option<&str>, KbError> {
        self.ontology.sub_concepts(mc)?;
        Ok(self
            .map
            .get(mc)
            .and_then(|m| m.get(&normalize_word(word)))
            .map(String::as_str))
    }

    pub fn add(&mut self, mc: &str, word: &str, sc: &str) -> Result<(), KbError> {
        self.ontology.check(mc, sc)?;
        let w = normalize_word(word);
        let entries = self.map.entry(mc.to_string()).or_default();
        if let Some(existing) = entries.get(&w) {
            return Err(KbError::AlreadyMapped {
                mc: mc.to_string(),
                word: w,
                existing: existing.clone(),
            });
        }
        entries.insert(w, sc.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
