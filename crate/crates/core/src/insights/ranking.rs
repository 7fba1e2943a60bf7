use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scorers::SCORER_NAMES;
use super::{Insight, InsightError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub weights: BTreeMap<String, f64>,
    pub k: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        let w = 1.0 / SCORER_NAMES.len() as f64;
        Self {
            weights: SCORER_NAMES.iter().map(|s| (s.to_string(), w)).collect(),
            k: 3,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), InsightError> {
        if self.k == 0 {
            return Err(InsightError::Config("k must be positive".into()));
        }
        if let Some((name, w)) = self.weights.iter().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(InsightError::Config(format!("weight for '{name}' must be non-negative, got {w}")));
        }
        if !self.weights.values().any(|w| *w > 0.0) {
            return Err(InsightError::Config("at least one weight must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, InsightError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| InsightError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn aggregate(&self, scores: &BTreeMap<String, f64>) -> Result<f64, InsightError> {
        let mut total = 0.0;
        for (name, w) in &self.weights {
            let s = scores
                .get(name)
                .ok_or_else(|| InsightError::MissingScorer(name.clone()))?;
            total += w * s;
        }
        Ok(total)
    }
}

/// Descending aggregate, then subject, then primitive name.
pub fn insight_order(a: &Insight, b: &Insight) -> Ordering {
    b.aggregate
        .total_cmp(&a.aggregate)
        .then_with(|| a.subject.cmp(&b.subject))
        .then_with(|| a.primitive.name().cmp(b.primitive.name()))
}

pub fn rank_and_select(mut insights: Vec<Insight>, config: &ScoringConfig) -> Result<Vec<Insight>, InsightError> {
    config.validate()?;
    for ins in &mut insights {
        ins.aggregate = config.aggregate(&ins.utility_scores)?;
    }
    insights.sort_by(insight_order);
    insights.truncate(config.k);
    Ok(insights)
}
