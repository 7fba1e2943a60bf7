//! Vocabulary knowledge base mapping user words to sub-concepts.
//!
//! Two interchangeable variants share one interface through [`KnowledgeBase`]:
//! [`NaiveKb`] keeps the first mapping it is taught forever, [`BeliefTable`]
//! keeps a belief distribution per word and can forget.
//!
//! KB-JSON layout:
//!
//! ```text
//! {version:1, variant:"nkb"|"rkb", ontology:{mc:[sc...]}, entries:[{mc, word, dist:{sc:prob}, l}]}
//! ```

mod naive;
pub mod ontology;
mod robust;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use naive::NaiveKb;
pub use ontology::{Ontology, ACTION, OBJECT};
pub use robust::{BeliefEntry, BeliefTable};

pub const KB_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KbError {
    #[error("unknown main concept '{0}'")]
    UnknownMainConcept(String),
    #[error("'{sc}' is not a sub-concept of '{mc}'")]
    UnknownSubConcept { mc: String, sc: String },
    #[error("ALREADY_MAPPED: '{word}' under '{mc}' is already mapped to '{existing}'")]
    AlreadyMapped { mc: String, word: String, existing: String },
    #[error("invalid ontology: {0}")]
    InvalidOntology(String),
    #[error("migration error: KB schema version {found} is not supported (expected {KB_VERSION})")]
    Migration { found: u32 },
    #[error("variant mismatch: expected {expected}, file holds {found}")]
    VariantMismatch { expected: String, found: String },
    #[error("KB file parse error: {0}")]
    Parse(String),
}

/// Lowercases and collapses whitespace so "Pie  Chart" and "pie chart" share an entry.
pub fn normalize_word(word: &str) -> String {
    word.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Nkb,
    Rkb,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Nkb => "nkb",
            Variant::Rkb => "rkb",
        }
    }
}

/// The outcome of teaching a word, so callers can tell a rejected NKB overwrite apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Learned {
    Updated,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KnowledgeBase {
    Naive(NaiveKb),
    Robust(BeliefTable),
}

impl KnowledgeBase {
    pub fn new(variant: Variant, ontology: Ontology) -> Self {
        match variant {
            Variant::Nkb => KnowledgeBase::Naive(NaiveKb::new(ontology)),
            Variant::Rkb => KnowledgeBase::Robust(BeliefTable::new(ontology)),
        }
    }

    /// Default ontology pre-taught with the canonical vocabulary of each sub-concept.
    pub fn seeded(variant: Variant) -> Self {
        let mut kb = Self::new(variant, Ontology::default());
        for (mc, word, sc) in SEED_VOCABULARY {
            kb.learn(mc, word, sc).expect("seed vocabulary fits the default ontology");
        }
        kb
    }

    pub fn variant(&self) -> Variant {
        match self {
            KnowledgeBase::Naive(_) => Variant::Nkb,
            KnowledgeBase::Robust(_) => Variant::Rkb,
        }
    }

    pub fn ontology(&self) -> &Ontology {
        match self {
            KnowledgeBase::Naive(k) => &k.ontology,
            KnowledgeBase::Robust(k) => &k.ontology,
        }
    }

    pub fn extend_ontology(&mut self, mc: &str, sc: &str) -> Result<(), KbError> {
        match self {
            KnowledgeBase::Naive(k) => k.ontology.add_sub_concept(mc, sc),
            KnowledgeBase::Robust(k) => k.ontology.add_sub_concept(mc, sc),
        }
    }

    pub fn infer(&self, mc: &str, word: &str) -> Result<Option<&str>, KbError> {
        match self {
            KnowledgeBase::Naive(k) => k.infer(mc, word),
            KnowledgeBase::Robust(k) => k.infer(mc, word),
        }
    }

    /// NKB: add if absent (an existing mapping is kept and reported as rejected).
    /// RKB: one belief observation.
    pub fn learn(&mut self, mc: &str, word: &str, sc: &str) -> Result<Learned, KbError> {
        match self {
            KnowledgeBase::Naive(k) => match k.add(mc, word, sc) {
                Ok(()) => Ok(Learned::Updated),
                Err(KbError::AlreadyMapped { .. }) => Ok(Learned::Rejected),
                Err(e) => Err(e),
            },
            KnowledgeBase::Robust(k) => k.observe(mc, word, sc).map(|_| Learned::Updated),
        }
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<EntryFile> = match self {
            KnowledgeBase::Naive(k) => k
                .map
                .iter()
                .flat_map(|(mc, words)| {
                    words.iter().map(move |(w, sc)| EntryFile {
                        mc: mc.clone(),
                        word: w.clone(),
                        dist: BTreeMap::from([(sc.clone(), 1.0)]),
                        l: 1,
                    })
                })
                .collect(),
            KnowledgeBase::Robust(k) => k
                .entries
                .iter()
                .flat_map(|(mc, words)| {
                    words.iter().map(move |(w, e)| EntryFile {
                        mc: mc.clone(),
                        word: w.clone(),
                        dist: e.dist.clone(),
                        l: e.l,
                    })
                })
                .collect(),
        };
        let file = KbFile {
            version: KB_VERSION,
            variant: self.variant(),
            ontology: self.ontology().clone(),
            entries,
        };
        serde_json::to_string_pretty(&file).expect("KB serializes")
    }

    /// Loads either variant, dispatching on the file's `variant` field.
    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let file = KbFile::parse(text)?;
        match file.variant {
            Variant::Nkb => Self::naive_from_file(file),
            Variant::Rkb => Self::robust_from_file(file),
        }
    }

    /// Loads a file that must hold the given variant.
    pub fn from_json_as(text: &str, expected: Variant) -> Result<Self, KbError> {
        let file = KbFile::parse(text)?;
        if file.variant != expected {
            return Err(KbError::VariantMismatch {
                expected: expected.as_str().into(),
                found: file.variant.as_str().into(),
            });
        }
        Self::from_json(text)
    }

    fn naive_from_file(file: KbFile) -> Result<Self, KbError> {
        let mut kb = NaiveKb::new(file.ontology);
        for e in file.entries {
            let sc = e
                .dist
                .iter()
                .find(|(_, p)| **p > 0.0)
                .map(|(s, _)| s.clone())
                .ok_or_else(|| KbError::Parse(format!("entry '{}' has no mapping", e.word)))?;
            kb.add(&e.mc, &e.word, &sc)?;
        }
        Ok(KnowledgeBase::Naive(kb))
    }

    fn robust_from_file(file: KbFile) -> Result<Self, KbError> {
        let mut kb = BeliefTable::new(file.ontology);
        for e in file.entries {
            for sc in e.dist.keys() {
                kb.ontology.check(&e.mc, sc)?;
            }
            let sum: f64 = e.dist.values().sum();
            if e.l == 0 || (sum - 1.0).abs() > 1e-9 || e.dist.values().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(KbError::Parse(format!("entry '{}' is not a normalized distribution", e.word)));
            }
            kb.entries
                .entry(e.mc)
                .or_default()
                .insert(normalize_word(&e.word), BeliefEntry { dist: e.dist, l: e.l });
        }
        Ok(KnowledgeBase::Robust(kb))
    }
}

#[derive(Serialize, Deserialize)]
struct EntryFile {
    mc: String,
    word: String,
    dist: BTreeMap<String, f64>,
    l: u64,
}

#[derive(Serialize, Deserialize)]
struct KbFile {
    version: u32,
    variant: Variant,
    ontology: Ontology,
    entries: Vec<EntryFile>,
}

impl KbFile {
    fn parse(text: &str) -> Result<Self, KbError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| KbError::Parse(e.to_string()))?;
        let version = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != KB_VERSION {
            return Err(KbError::Migration { found: version });
        }
        let file: KbFile = serde_json::from_value(raw).map_err(|e| KbError::Parse(e.to_string()))?;
        file.ontology.validate()?;
        Ok(file)
    }
}

const SEED_VOCABULARY: &[(&str, &str, &str)] = &[
    (OBJECT, "piechart", "piechart"),
    (OBJECT, "pie chart", "piechart"),
    (OBJECT, "barchart", "barchart"),
    (OBJECT, "bar chart", "barchart"),
    (OBJECT, "linechart", "linechart"),
    (OBJECT, "line chart", "linechart"),
    (OBJECT, "table", "table"),
    (OBJECT, "company_briefing_deck", "company_briefing_deck"),
    (OBJECT, "companybriefingdeck", "company_briefing_deck"),
    (OBJECT, "company briefing deck", "company_briefing_deck"),
    (OBJECT, "briefing deck", "company_briefing_deck"),
    (ACTION, "create", "create"),
    (ACTION, "make", "create"),
    (ACTION, "generate", "create"),
    (ACTION, "build", "create"),
    (ACTION, "update", "update"),
    (ACTION, "refresh", "update"),
    (ACTION, "delete", "delete"),
    (ACTION, "remove", "delete"),
];
