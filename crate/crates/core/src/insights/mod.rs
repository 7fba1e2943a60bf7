//! Numerical primitives, slot-template sentences and top-K selection.

pub mod primitives;
mod ranking;
pub mod scorers;
pub mod template;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use primitives::{compute_on, compute_primitives, evaluate, Primitive, PrimitiveKind, PrimitiveValue};
pub use ranking::{insight_order, rank_and_select, ScoringConfig};
pub use scorers::{builtin_scorers, score_on};
pub use template::{default_templates, parse_template_file, render_insight, Binding, InsightTemplate, Segment};

use crate::timeseries::ValueSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InsightError {
    #[error("window {window} exceeds series length {len}")]
    Window { window: usize, len: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("series '{0}' is empty")]
    Empty(String),
    #[error("unbound slot '{0}'")]
    UnboundSlot(String),
    #[error("insight has no score for weighted scorer '{0}'")]
    MissingScorer(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("scoring config error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Insight {
    pub primitive: Primitive,
    pub subject: String,
    pub value: f64,
    pub period: (NaiveDate, NaiveDate),
    pub utility_scores: BTreeMap<String, f64>,
    pub aggregate: f64,
    pub text: String,
}

/// Window used by rolling primitives, capped to the series length.
pub const DEFAULT_WINDOW: usize = 20;

pub fn default_primitives(len: usize) -> Vec<Primitive> {
    let w = DEFAULT_WINDOW.min(len.max(1));
    PrimitiveKind::ALL
        .into_iter()
        .map(|k| if k.uses_window() { Primitive::windowed(k, w) } else { Primitive::new(k) })
        .collect()
}

fn bindings_for(series: &ValueSeries, pv: &PrimitiveValue) -> BTreeMap<String, Binding> {
    let mut b = BTreeMap::new();
    b.insert("subject".to_string(), Binding::from(series.name.as_str()));
    b.insert("company share".to_string(), Binding::from(series.name.as_str()));
    b.insert("field".to_string(), Binding::from(series.field.as_str()));
    b.insert("value".to_string(), Binding::Number(pv.value));
    b.insert("rate".to_string(), Binding::Number(pv.value * 100.0));
    b.insert("start".to_string(), Binding::Text(pv.period.0.to_string()));
    b.insert("end".to_string(), Binding::Text(pv.period.1.to_string()));
    b.insert("window".to_string(), Binding::Number(pv.primitive.window.unwrap_or(0) as f64));
    b
}

/// Full pipeline for one slide: primitives over `current`, rendering, scoring
/// against `history` and `peers`, then top-K. Primitives that cannot be
/// evaluated on the data (too short, zero spread) are skipped.
pub fn generate_insights(
    current: &ValueSeries,
    history: &ValueSeries,
    peers: &[ValueSeries],
    templates: &[InsightTemplate],
    config: &ScoringConfig,
) -> Result<Vec<Insight>, InsightError> {
    let mut candidates = Vec::new();
    for p in default_primitives(current.len()) {
        let Ok(pv) = evaluate(current, &p) else { continue };
        let Some(template) = templates.iter().find(|t| t.applicable_primitive == Some(p.kind)) else {
            continue;
        };
        let text = template.render(&bindings_for(current, &pv))?;
        let mut ins = Insight {
            primitive: p,
            subject: current.name.clone(),
            value: pv.value,
            period: pv.period,
            utility_scores: BTreeMap::new(),
            aggregate: 0.0,
            text,
        };
        ins.utility_scores = score_on(&ins, history, peers);
        candidates.push(ins);
    }
    rank_and_select(candidates, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ins(subject: &str, kind: PrimitiveKind, scores: &[(&str, f64)]) -> Insight {
        let d = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        Insight {
            primitive: Primitive::new(kind),
            subject: subject.into(),
            value: 1.0,
            period: (d, d),
            utility_scores: scores.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            aggregate: 0.0,
            text: "x".into(),
        }
    }

    fn cfg(k: usize) -> ScoringConfig {
        ScoringConfig { weights: BTreeMap::from([("a".to_string(), 1.0)]), k }
    }

    #[test]
    fn top_two_of_five() {
        let xs: Vec<Insight> = [0.3, 0.9, 0.1, 0.7, 0.5]
            .iter()
            .enumerate()
            .map(|(i, &s)| ins(&format!("S{i}"), PrimitiveKind::Minimum, &[("a", s)]))
            .collect();
        let top = rank_and_select(xs.clone(), &cfg(2)).unwrap();
        assert_eq!(top.iter().map(|i| i.aggregate).collect::<Vec<_>>(), vec![0.9, 0.7]);
        assert_eq!(rank_and_select(xs, &cfg(10)).unwrap().len(), 5);
    }

    #[test]
    fn ties_break_on_subject_then_primitive() {
        let xs = vec![
            ins("B", PrimitiveKind::Minimum, &[("a", 1.0)]),
            ins("A", PrimitiveKind::Volatility, &[("a", 1.0)]),
            ins("A", PrimitiveKind::Maximum, &[("a", 1.0)]),
        ];
        let got = rank_and_select(xs, &cfg(3)).unwrap();
        let keys: Vec<(&str, &str)> = got.iter().map(|i| (i.subject.as_str(), i.primitive.name())).collect();
        assert_eq!(keys, vec![("A", "maximum"), ("A", "volatility"), ("B", "minimum")]);
    }

    #[test]
    fn missing_scorer_and_bad_config() {
        let err = rank_and_select(vec![ins("A", PrimitiveKind::Minimum, &[])], &cfg(1)).unwrap_err();
        assert_eq!(err, InsightError::MissingScorer("a".into()));
        assert!(ScoringConfig::from_json(r#"{"weights":{"a":0.0},"k":2}"#).is_err());
        assert!(ScoringConfig::from_json(r#"{"weights":{"a":1.0},"k":0}"#).is_err());
        let ok = ScoringConfig::from_json(r#"{"weights":{"a":0.5},"k":2}"#).unwrap();
        assert_eq!(ScoringConfig::from_json(&ok.to_json()).unwrap(), ok);
    }

    #[test]
    fn pipeline_emits_at_most_k() {
        let s = crate::timeseries::synthetic_ohlcv("TSLA", NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(), 120, 100.0, 3);
        let closes = s.closes();
        let current = closes.slice(60, 120);
        let got = generate_insights(&current, &closes, &[], &default_templates(), &ScoringConfig::default()).unwrap();
        assert_eq!(got.len(), 3);
        assert!(got.iter().all(|i| !i.text.is_empty() && i.text.contains("TSLA")));
    }
}
