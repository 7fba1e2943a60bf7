//! Concept tagging of natural-language commands.
//!
//! Commands are tokenized, POS-tagged, featurized and decoded with a
//! linear-chain CRF into one [`ConceptLabel`] per token.

pub mod corpus;
pub mod crf;
pub mod eval;
pub mod features;
pub mod pos;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crf::{tag_command, train_tagger, train_with_report, CrfModel, TrainConfig, TrainReport};
pub use eval::{evaluate_tagger, Evaluation};
pub use features::{featurize, TokenFeatures, BOUNDARY};
pub use pos::{tokenize, tokenize_and_pos, Pos};

pub const NUM_LABELS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("empty command")]
    EmptyCommand,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("model file: {0}")]
    Model(String),
    #[error("test set is empty")]
    EmptyTestSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConceptLabel {
    Action,
    Data,
    Object,
    Presentation,
    Outside,
}

impl ConceptLabel {
    pub const ALL: [ConceptLabel; NUM_LABELS] = [
        ConceptLabel::Action,
        ConceptLabel::Data,
        ConceptLabel::Object,
        ConceptLabel::Presentation,
        ConceptLabel::Outside,
    ];

    pub const CONCEPTS: [ConceptLabel; 4] = [
        ConceptLabel::Action,
        ConceptLabel::Data,
        ConceptLabel::Object,
        ConceptLabel::Presentation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConceptLabel::Action => "ACTION",
            ConceptLabel::Data => "DATA",
            ConceptLabel::Object => "OBJECT",
            ConceptLabel::Presentation => "PRESENTATION",
            ConceptLabel::Outside => "OUTSIDE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ACTION" => Some(ConceptLabel::Action),
            "DATA" => Some(ConceptLabel::Data),
            "OBJECT" => Some(ConceptLabel::Object),
            "PRESENTATION" => Some(ConceptLabel::Presentation),
            "OUTSIDE" | "O" => Some(ConceptLabel::Outside),
            _ => None,
        }
    }
}

impl fmt::Display for ConceptLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedCommand {
    pub tokens: Vec<String>,
    pub labels: Vec<ConceptLabel>,
}

/// A maximal run of tokens sharing one concept label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub label: ConceptLabel,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl TaggedCommand {
    pub fn new(tokens: Vec<String>, labels: Vec<ConceptLabel>) -> Result<Self, ParseError> {
        if tokens.len() != labels.len() {
            return Err(ParseError::Corpus {
                line: 0,
                message: format!("{} tokens but {} labels", tokens.len(), labels.len()),
            });
        }
        Ok(Self { tokens, labels })
    }

    /// Contiguous same-label runs, OUTSIDE excluded.
    pub fn spans(&self) -> Vec<Span> {
        let mut spans = Vec::new();
        let mut i = 0;
        while i < self.labels.len() {
            let label = self.labels[i];
            let mut j = i + 1;
            while j < self.labels.len() && self.labels[j] == label {
                j += 1;
            }
            if label != ConceptLabel::Outside {
                spans.push(Span { label, start: i, end: j, text: self.tokens[i..j].join(" ") });
            }
            i = j;
        }
        spans
    }

    /// `token/LABEL` pairs separated by single spaces.
    pub fn to_annotated(&self) -> String {
        self.tokens
            .iter()
            .zip(&self.labels)
            .map(|(t, l)| format!("{t}/{l}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn from_annotated(line: &str) -> Result<Self, String> {
        let mut tokens = Vec::new();
        let mut labels = Vec::new();
        for item in line.split_whitespace() {
            let (tok, lab) = item
                .rsplit_once('/')
                .ok_or_else(|| format!("'{item}' is not token/LABEL"))?;
            if tok.is_empty() {
                return Err(format!("empty token in '{item}'"));
            }
            let label = ConceptLabel::parse(lab).ok_or_else(|| format!("unknown label '{lab}'"))?;
            tokens.push(tok.to_string());
            labels.push(label);
        }
        Ok(Self { tokens, labels })
    }
}

/// One annotated command per line; blank lines and `#` comments are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<TaggedCommand>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cmd = TaggedCommand::from_annotated(line)
            .map_err(|message| ParseError::Corpus { line: i + 1, message })?;
        out.push(cmd);
    }
    Ok(out)
}

pub fn write_corpus(commands: &[TaggedCommand]) -> String {
    let mut s = String::new();
    for c in commands {
        s.push_str(&c.to_annotated());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_merge_runs() {
        let cmd = TaggedCommand::from_annotated(
            "add/OUTSIDE it/OUTSIDE in/OUTSIDE weekly/PRESENTATION report/PRESENTATION ./OUTSIDE",
        )
        .unwrap();
        let spans = cmd.spans();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].text, "weekly report");
        assert_eq!((spans[0].start, spans[0].end), (3, 5));
    }

    #[test]
    fn annotated_round_trip_and_errors() {
        let line = "create/ACTION a/OUTSIDE Piechart/OBJECT";
        let cmd = TaggedCommand::from_annotated(line).unwrap();
        assert_eq!(cmd.to_annotated(), line);
        assert!(TaggedCommand::from_annotated("create/VERBISH").is_err());
        let err = parse_corpus("ok/O\nbad\n").unwrap_err();
        assert!(matches!(err, ParseError::Corpus { line: 2, .. }));
        // a token may itself contain a slash
        let c = TaggedCommand::from_annotated("a/b/DATA").unwrap();
        assert_eq!(c.tokens, ["a/b"]);
    }
}
