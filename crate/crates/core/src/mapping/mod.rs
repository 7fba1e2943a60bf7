//! Turns a tagged command into a concrete skill invocation, asking for
//! clarification whenever a word cannot be resolved.
//!
//! Slots are filled in a fixed order: action, object, data, presentation. The
//! first slot that cannot be resolved becomes the pending
//! [`ClarificationRequest`]; answering it teaches the KB (or the alias table
//! for the data slot) and resumes from where resolution stopped.

mod aliases;
mod params;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aliases::AliasTable;
pub use params::{apply_edits, recognize_edits, ParamEdit};

use crate::deck::DeckParameters;
use crate::kb::{normalize_word, KbError, KnowledgeBase, ACTION, OBJECT};
use crate::parser::{ConceptLabel, TaggedCommand};

/// Literal slot name used when the data reference cannot be resolved.
pub const TICKER_SLOT: &str = "ticker";
pub const RUN_TRIGGER: &str = "run the analysis";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("ambiguous command: several {label} spans ({})", spans.join(", "))]
    Ambiguity { label: String, spans: Vec<String> },
    #[error("invalid choice '{answer}'; expected one of: {}", candidates.join(", "))]
    InvalidChoice { answer: String, candidates: Vec<String> },
    #[error("no clarification is pending")]
    NoPending,
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}

impl MappingError {
    pub fn code(&self) -> &'static str {
        match self {
            MappingError::Ambiguity { .. } => "AMBIGUOUS_COMMAND",
            MappingError::InvalidChoice { .. } => "INVALID_CHOICE",
            MappingError::NoPending => "NO_PENDING_CLARIFICATION",
            MappingError::Validation(_) => "VALIDATION_ERROR",
            MappingError::Kb(KbError::AlreadyMapped { .. }) => "ALREADY_MAPPED",
            MappingError::Kb(_) => "KB_ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedIntent {
    pub action: String,
    pub object: String,
    pub data_ref: String,
    pub presentation: String,
    #[serde(default)]
    pub extra_params: BTreeMap<String, String>,
}

impl ResolvedIntent {
    pub fn new(action: &str, object: &str, data_ref: &str, presentation: &str) -> Self {
        Self {
            action: action.into(),
            object: object.into(),
            data_ref: data_ref.into(),
            presentation: presentation.into(),
            extra_params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: &str) -> Self {
        self.extra_params.insert(key.into(), value.into());
        self
    }

    pub fn validate(&self, kb: &KnowledgeBase) -> Result<(), MappingError> {
        kb.ontology().check(ACTION, &self.action)?;
        kb.ontology().check(OBJECT, &self.object)?;
        if self.data_ref.trim().is_empty() || self.presentation.trim().is_empty() {
            return Err(MappingError::Validation("data_ref and presentation must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "lowercase")]
pub enum Missing {
    /// A closed-class main concept such as `object`.
    Concept(String),
    /// An open-class literal slot such as `ticker`.
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationRequest {
    pub missing: Missing,
    pub unknown_word: Option<String>,
    pub candidates: Vec<String>,
    pub question: String,
}

/// A partially-filled intent plus the raw words still waiting to be resolved.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartialIntent {
    pub action: Option<String>,
    pub object: Option<String>,
    pub data_ref: Option<String>,
    pub presentation: Option<String>,
    pub extra_params: BTreeMap<String, String>,
    pub words: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionState {
    pub pending: Option<ClarificationRequest>,
    pub partial: Option<PartialIntent>,
    pub deck_parameters: DeckParameters,
    pub last_data_ref: Option<String>,
    pub last_presentation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Resolution {
    Intent(ResolvedIntent),
    Clarify(ClarificationRequest),
}

fn slot_key(label: ConceptLabel) -> &'static str {
    match label {
        ConceptLabel::Action => "action",
        ConceptLabel::Object => "object",
        ConceptLabel::Data => "data",
        ConceptLabel::Presentation => "presentation",
        ConceptLabel::Outside => "outside",
    }
}

/// Collects the single span per concept, rejecting contradictory duplicates.
fn collect_words(tagged: &TaggedCommand) -> Result<BTreeMap<String, String>, MappingError> {
    let mut by_label: BTreeMap<&'static str, Vec<String>> = BTreeMap::new();
    for span in tagged.spans() {
        let texts = by_label.entry(slot_key(span.label)).or_default();
        if !texts.iter().any(|t| normalize_word(t) == normalize_word(&span.text)) {
            texts.push(span.text);
        }
    }
    let mut words = BTreeMap::new();
    for (label, texts) in by_label {
        if texts.len() > 1 {
            return Err(MappingError::Ambiguity { label: label.to_uppercase(), spans: texts });
        }
        words.insert(label.to_string(), texts.into_iter().next().expect("one span"));
    }
    Ok(words)
}

fn concept_question(mc: &str, word: Option<&str>, candidates: &[String]) -> String {
    match word {
        Some(w) => format!("I don't know what '{w}' means as an {mc}. Which one did you mean: {}?", candidates.join(", ")),
        None => format!("Which {mc} should I use: {}?", candidates.join(", ")),
    }
}

fn default_presentation(data_ref: &str, object: &str) -> String {
    format!("{}_{}", data_ref, object).to_lowercase().replace(' ', "_")
}

/// Fills the remaining slots of `partial` in order, stopping at the first gap.
fn advance(mut partial: PartialIntent, kb: &KnowledgeBase, aliases: &AliasTable, state: &mut SessionState) -> Result<Resolution, MappingError> {
    for (slot, mc) in [("action", ACTION), ("object", OBJECT)] {
        let filled = if slot == "action" { partial.action.is_some() } else { partial.object.is_some() };
        if filled {
            continue;
        }
        let word = partial.words.get(slot).cloned();
        let sigma = match &word {
            Some(w) => kb.infer(mc, w)?.map(str::to_string),
            None => None,
        };
        match sigma {
            Some(s) if slot == "action" => partial.action = Some(s),
            Some(s) => partial.object = Some(s),
            None => {
                let candidates: Vec<String> = kb.ontology().sub_concepts(mc)?.iter().cloned().collect();
                let req = ClarificationRequest {
                    question: concept_question(mc, word.as_deref(), &candidates),
                    missing: Missing::Concept(mc.to_string()),
                    unknown_word: word,
                    candidates,
                };
                return Ok(park(partial, req, state));
            }
        }
    }

    if partial.data_ref.is_none() {
        let word = partial.words.get("data").cloned();
        let resolved = match &word {
            Some(w) => aliases.resolve(w),
            None => state.last_data_ref.clone(),
        };
        match resolved {
            Some(d) => partial.data_ref = Some(d),
            None => {
                let question = match &word {
                    Some(w) => format!("I cannot recognize '{w}'. Which ticker should I use?"),
                    None => "Which ticker should I use?".to_string(),
                };
                let req = ClarificationRequest {
                    missing: Missing::Literal(TICKER_SLOT.into()),
                    unknown_word: word,
                    candidates: aliases.datasets.iter().cloned().collect(),
                    question,
                };
                return Ok(park(partial, req, state));
            }
        }
    }

    if partial.presentation.is_none() {
        let p = match partial.words.get("presentation") {
            Some(w) => w.trim().to_string(),
            None => state.last_presentation.clone().unwrap_or_else(|| {
                default_presentation(
                    partial.data_ref.as_deref().expect("filled above"),
                    partial.object.as_deref().expect("filled above"),
                )
            }),
        };
        partial.presentation = Some(p);
    }

    let intent = ResolvedIntent {
        action: partial.action.take().expect("filled"),
        object: partial.object.take().expect("filled"),
        data_ref: partial.data_ref.take().expect("filled"),
        presentation: partial.presentation.take().expect("filled"),
        extra_params: partial.extra_params,
    };
    intent.validate(kb)?;
    state.pending = None;
    state.partial = None;
    state.last_data_ref = Some(intent.data_ref.clone());
    state.last_presentation = Some(intent.presentation.clone());
    Ok(Resolution::Intent(intent))
}

fn park(partial: PartialIntent, req: ClarificationRequest, state: &mut SessionState) -> Resolution {
    state.partial = Some(partial);
    state.pending = Some(req.clone());
    Resolution::Clarify(req)
}

/// Resolves a freshly tagged command. Any earlier pending clarification is discarded.
pub fn resolve(
    tagged: &TaggedCommand,
    kb: &KnowledgeBase,
    aliases: &AliasTable,
    state: &mut SessionState,
) -> Result<Resolution, MappingError> {
    resolve_with(tagged, BTreeMap::new(), kb, aliases, state)
}

/// Like [`resolve`], seeding the intent's `extra_params`.
pub fn resolve_with(
    tagged: &TaggedCommand,
    extra_params: BTreeMap<String, String>,
    kb: &KnowledgeBase,
    aliases: &AliasTable,
    state: &mut SessionState,
) -> Result<Resolution, MappingError> {
    let words = collect_words(tagged)?;
    state.pending = None;
    state.partial = None;
    let partial = PartialIntent { words, extra_params, ..Default::default() };
    advance(partial, kb, aliases, state)
}

fn normalize_choice(answer: &str) -> String {
    normalize_word(answer).replace(' ', "_")
}

/// Answers the pending clarification. On an invalid answer the pending request is left untouched.
pub fn apply_clarification(
    state: &mut SessionState,
    answer: &str,
    kb: &mut KnowledgeBase,
    aliases: &mut AliasTable,
) -> Result<Resolution, MappingError> {
    let req = state.pending.clone().ok_or(MappingError::NoPending)?;
    let mut partial = state.partial.clone().unwrap_or_default();
    match &req.missing {
        Missing::Concept(mc) => {
            let choice = normalize_choice(answer);
            if !req.candidates.contains(&choice) {
                return Err(MappingError::InvalidChoice { answer: answer.trim().to_string(), candidates: req.candidates });
            }
            if let Some(w) = &req.unknown_word {
                kb.learn(mc, w, &choice)?;
            }
            if mc == ACTION {
                partial.action = Some(choice);
            } else {
                partial.object = Some(choice);
            }
        }
        Missing::Literal(_) => {
            let Some(dataset) = aliases.resolve(answer) else {
                return Err(MappingError::InvalidChoice { answer: answer.trim().to_string(), candidates: req.candidates });
            };
            if let Some(w) = &req.unknown_word {
                aliases.add(w, &dataset);
            }
            partial.extra_params.insert(TICKER_SLOT.into(), dataset.clone());
            partial.data_ref = Some(dataset);
        }
    }
    state.pending = None;
    state.partial = None;
    advance(partial, kb, aliases, state)
}

/// Applies parameter edits to the session and returns the new parameters with any warnings.
pub fn update_parameters(state: &mut SessionState, edits: &[ParamEdit]) -> Result<(DeckParameters, Vec<String>), MappingError> {
    let (p, warnings) = apply_edits(&state.deck_parameters, edits)?;
    state.deck_parameters = p.clone();
    Ok((p, warnings))
}

pub fn is_run_trigger(text: &str) -> bool {
    let t = text.trim().trim_end_matches(['.', '!', '?']).trim();
    t.to_lowercase() == RUN_TRIGGER
}
