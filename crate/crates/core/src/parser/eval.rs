use std::collections::BTreeMap;

use serde::Serialize;

use super::crf::CrfModel;
use super::{ConceptLabel, ParseError, TaggedCommand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Token-level scores macro-averaged over the four concept labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub macro_f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub per_label: BTreeMap<ConceptLabel, LabelScores>,
}

/// Scores gold against predicted label sequences. A concept label that occurs in neither
/// gold nor predictions is left out of the macro average; undefined precision or recall
/// (no predictions / no gold) counts as 0.
pub fn score_labels(pairs: &[(Vec<ConceptLabel>, Vec<ConceptLabel>)]) -> Evaluation {
    let mut per_label = BTreeMap::new();
    for label in ConceptLabel::CONCEPTS {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (gold, pred) in pairs {
            for (g, p) in gold.iter().zip(pred) {
                match (*g == label, *p == label) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fn_ += 1,
                    _ => {}
                }
            }
        }
        if tp + fp + fn_ == 0 {
            continue;
        }
        let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
        let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_label.insert(label, LabelScores { precision, recall, f1, support: tp + fn_ });
    }
    let k = per_label.len().max(1) as f64;
    let mean = |f: fn(&LabelScores) -> f64| per_label.values().map(f).sum::<f64>() / k;
    Evaluation {
        macro_f1: mean(|s| s.f1),
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        per_label,
    }
}

pub fn evaluate_tagger(model: &CrfModel, test: &[TaggedCommand]) -> Result<Evaluation, ParseError> {
    if test.is_empty() {
        return Err(ParseError::EmptyTestSet);
    }
    let pairs: Vec<_> = test
        .iter()
        .map(|c| (c.labels.clone(), model.viterbi(&c.tokens)))
        .collect();
    Ok(score_labels(&pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConceptLabel::*;

    #[test]
    fn perfect_predictions() {
        let gold = vec![Action, Outside, Object, Data, Presentation];
        let e = score_labels(&[(gold.clone(), gold)]);
        assert_eq!((e.macro_f1, e.precision, e.recall), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_outside_predictions_have_zero_recall() {
        let gold = vec![Action, Outside, Object, Data, Presentation];
        let e = score_labels(&[(gold, vec![Outside; 5])]);
        assert!(e.per_label.values().all(|s| s.recall == 0.0));
        assert_eq!(e.macro_f1, 0.0);
    }

    #[test]
    fn absent_label_is_skipped() {
        let gold = vec![Action, Object];
        let pred = vec![Action, Data];
        let e = score_labels(&[(gold, pred)]);
        // Presentation never appears; Data only as a false positive
        assert!(!e.per_label.contains_key(&Presentation));
        assert_eq!(e.per_label.len(), 3);
        assert!((e.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
    }
}
