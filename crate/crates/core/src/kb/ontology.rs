use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::KbError;

pub const OBJECT: &str = "object";
pub const ACTION: &str = "action";

/// Closed-class main concepts and their sub-concepts. Iteration order is
/// lexicographic everywhere, which fixes tie-breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ontology {
    concepts: BTreeMap<String, BTreeSet<String>>,
}

impl Default for Ontology {
    fn default() -> Self {
        Self::from_pairs(&[
            (OBJECT, &["piechart", "barchart", "linechart", "table", "company_briefing_deck"]),
            (ACTION, &["create", "update", "delete"]),
        ])
        .expect("default ontology is valid")
    }
}

impl Ontology {
    pub fn from_pairs(pairs: &[(&str, &[&str])]) -> Result<Self, KbError> {
        let mut o = Ontology { concepts: BTreeMap::new() };
        for (mc, subs) in pairs {
            o.concepts.insert(mc.to_string(), BTreeSet::new());
            for sc in *subs {
                o.add_sub_concept(mc, sc)?;
            }
        }
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<(), KbError> {
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for (mc, subs) in &self.concepts {
            if subs.is_empty() {
                return Err(KbError::InvalidOntology(format!("main concept '{mc}' has no sub-concepts")));
            }
            for sc in subs {
                if let Some(prev) = owner.insert(sc, mc) {
                    return Err(KbError::InvalidOntology(format!(
                        "sub-concept '{sc}' belongs to both '{prev}' and '{mc}'"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn main_concepts(&self) -> impl Iterator<Item = &str> {
        self.concepts.keys().map(String::as_str)
    }

    pub fn sub_concepts(&self, mc: &str) -> Result<&BTreeSet<String>, KbError> {
        self.concepts
            .get(mc)
            .ok_or_else(|| KbError::UnknownMainConcept(mc.to_string()))
    }

    pub fn check(&self, mc: &str, sc: &str) -> Result<(), KbError> {
        if self.sub_concepts(mc)?.contains(sc) {
            Ok(())
        } else {
            Err(KbError::UnknownSubConcept { mc: mc.to_string(), sc: sc.to_string() })
        }
    }

    pub fn owner_of(&self, sc: &str) -> Option<&str> {
        self.concepts
            .iter()
            .find(|(_, subs)| subs.contains(sc))
            .map(|(mc, _)| mc.as_str())
    }

    /// Extends `mc` with a new sub-concept (e.g. a recorded macro). Idempotent.
    pub fn add_sub_concept(&mut self, mc: &str, sc: &str) -> Result<(), KbError> {
        if let Some(owner) = self.owner_of(sc) {
            if owner != mc {
                return Err(KbError::InvalidOntology(format!(
                    "sub-concept '{sc}' already belongs to '{owner}'"
                )));
            }
        }
        self.concepts.entry(mc.to_string()).or_default().insert(sc.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_lexicographic() {
        let o = Ontology::default();
        let objs: Vec<_> = o.sub_concepts(OBJECT).unwrap().iter().cloned().collect();
        assert_eq!(objs, ["barchart", "company_briefing_deck", "linechart", "piechart", "table"]);
        assert_eq!(o.owner_of("update"), Some(ACTION));
    }

    #[test]
    fn sub_concept_has_one_owner() {
        let mut o = Ontology::default();
        assert!(o.add_sub_concept(ACTION, "piechart").is_err());
        o.add_sub_concept(OBJECT, "my_weekly").unwrap();
        assert!(o.check(OBJECT, "my_weekly").is_ok());
        assert!(matches!(o.check("colour", "red"), Err(KbError::UnknownMainConcept(_))));
    }
}
