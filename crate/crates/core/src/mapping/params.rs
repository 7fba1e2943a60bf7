//! Deck-parameter edits: comparable firms, horizon and aggregation metric.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{AliasTable, MappingError};
use crate::deck::DeckParameters;
use crate::timeseries::Aggregation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ParamEdit {
    AddFirm { firm: String },
    RemoveFirm { firm: String },
    SetHorizon { months: i64 },
    SetMetric { metric: Aggregation },
}

/// Applies edits in order. Removing an absent firm or adding a present one is a
/// no-op reported in the returned warnings.
pub fn apply_edits(params: &DeckParameters, edits: &[ParamEdit]) -> Result<(DeckParameters, Vec<String>), MappingError> {
    let mut p = params.clone();
    let mut warnings = Vec::new();
    for e in edits {
        match e {
            ParamEdit::AddFirm { firm } => {
                if p.comparable_firms.contains(firm) {
                    warnings.push(format!("{firm} is already a comparable firm"));
                } else {
                    p.comparable_firms.push(firm.clone());
                }
            }
            ParamEdit::RemoveFirm { firm } => {
                let before = p.comparable_firms.len();
                p.comparable_firms.retain(|f| f != firm);
                if p.comparable_firms.len() == before {
                    warnings.push(format!("{firm} is not a comparable firm; nothing removed"));
                }
            }
            ParamEdit::SetHorizon { months } => {
                if *months <= 0 || *months > i64::from(u32::MAX) {
                    return Err(MappingError::Validation(format!("horizon must be a positive number of months, got {months}")));
                }
                p.horizon_months = *months as u32;
            }
            ParamEdit::SetMetric { metric } => p.aggregation_metric = *metric,
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((p, warnings))
}

fn months_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(-?\d+)\s*-?\s*months?\b").expect("valid regex"))
}

fn metric_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(median|mean)\b").expect("valid regex"))
}

const FIRM_CONTEXT: &[&str] = &["comparable", "comparables", "firm", "firms", "peer", "peers", "company", "companies"];
const ADD_VERBS: &[&str] = &["add", "adding", "include", "including", "plus"];
const REMOVE_VERBS: &[&str] = &["remove", "removing", "drop", "dropping", "exclude", "excluding", "without"];

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '&' || c == '.'))
        .map(|w| w.trim_matches('.'))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Recognizes a parameter-edit command. Returns `None` when the text is not one.
pub fn recognize_edits(text: &str, aliases: &AliasTable) -> Option<Vec<ParamEdit>> {
    let lower = text.to_lowercase();
    let mut edits = Vec::new();

    if lower.contains("horizon") || lower.contains("month") {
        if let Some(m) = months_re().captures_iter(&lower).last() {
            edits.push(ParamEdit::SetHorizon { months: m[1].parse().unwrap_or(0) });
        }
    }

    let metrics: Vec<(usize, &str)> = metric_re()
        .captures_iter(&lower)
        .map(|c| {
            let m = c.get(1).expect("group");
            (m.start(), m.as_str())
        })
        .collect();
    if !metrics.is_empty() {
        // "median instead of mean" names the target first, "mean to median" last
        let chosen = if lower.contains("instead of") { metrics[0].1 } else { metrics[metrics.len() - 1].1 };
        let metric = if chosen == "median" { Aggregation::Median } else { Aggregation::Mean };
        edits.push(ParamEdit::SetMetric { metric });
    }

    let ws = words(text);
    let lw: Vec<String> = ws.iter().map(|w| w.to_lowercase()).collect();
    if lw.iter().any(|w| FIRM_CONTEXT.contains(&w.as_str())) {
        let mut mode: Option<bool> = None;
        let mut i = 0;
        while i < ws.len() {
            let w = lw[i].as_str();
            if ADD_VERBS.contains(&w) {
                mode = Some(true);
                i += 1;
                continue;
            }
            if REMOVE_VERBS.contains(&w) {
                mode = Some(false);
                i += 1;
                continue;
            }
            if let Some(add) = mode {
                let two = (i + 1 < ws.len()).then(|| format!("{} {}", ws[i], ws[i + 1]));
                let hit = two
                    .as_deref()
                    .and_then(|t| aliases.resolve(t).map(|d| (d, 2)))
                    .or_else(|| (!FIRM_CONTEXT.contains(&w)).then(|| aliases.resolve(&ws[i]).map(|d| (d, 1))).flatten());
                if let Some((firm, used)) = hit {
                    edits.push(if add { ParamEdit::AddFirm { firm } } else { ParamEdit::RemoveFirm { firm } });
                    i += used;
                    continue;
                }
            }
            i += 1;
        }
    }
    (!edits.is_empty()).then_some(edits)
}
