//! Ranked neighbor word lists per sub-concept and the rank distributions users sample from.

use std::collections::{BTreeMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

pub const MAX_VOCAB: usize = 1000;

/// Hand-picked neighbors; generated `stem_i` variants fill the list up to the requested size.
const CURATED: &[(&str, &str, &[&str])] = &[
    ("barchart", "bars", &["bar chart", "bar graph", "histogram", "column chart", "bar plot", "column graph", "bar diagram"]),
    (
        "company_briefing_deck",
        "briefing",
        &["briefing deck", "company briefing", "briefing pack", "company deck", "overview deck", "company profile", "tear sheet"],
    ),
    ("linechart", "trend", &["line chart", "line graph", "trend line", "time plot", "line plot", "curve chart", "run chart"]),
    ("piechart", "wedges", &["pie chart", "pie graph", "pizzachart", "donut chart", "circle chart", "pie diagram", "sector chart"]),
    ("table", "grid", &["data table", "grid view", "tabulation", "spreadsheet", "matrix view", "tabular view", "data grid"]),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborLexicon {
    lists: BTreeMap<String, Vec<String>>,
}

impl NeighborLexicon {
    /// Validates duplicate-freeness and that every word belongs to one sub-concept.
    pub fn new(lists: BTreeMap<String, Vec<String>>) -> Result<Self, SimError> {
        if lists.is_empty() {
            return Err(SimError::Lexicon("lexicon has no sub-concepts".into()));
        }
        let mut seen = HashSet::new();
        for (sc, words) in &lists {
            if words.is_empty() || words.len() > MAX_VOCAB {
                return Err(SimError::Lexicon(format!("'{sc}' needs 1..={MAX_VOCAB} words, has {}", words.len())));
            }
            for w in words {
                if !seen.insert(w.as_str()) {
                    return Err(SimError::Lexicon(format!("word '{w}' appears more than once")));
                }
            }
        }
        Ok(Self { lists })
    }

    /// Curated synonyms followed by generated variants, `n` words per sub-concept.
    pub fn synthetic(n: usize) -> Result<Self, SimError> {
        if n == 0 || n > MAX_VOCAB {
            return Err(SimError::Config(format!("vocabulary size must be in 1..={MAX_VOCAB}, got {n}")));
        }
        let lists = CURATED
            .iter()
            .map(|(sc, stem, curated)| {
                let mut words: Vec<String> = curated.iter().map(|w| w.to_string()).collect();
                let mut i = 1;
                while words.len() < n {
                    words.push(format!("{stem}_{i}"));
                    i += 1;
                }
                words.truncate(n);
                (sc.to_string(), words)
            })
            .collect();
        Self::new(lists)
    }

    /// `sub_concept<TAB>word` lines, closest neighbor first.
    pub fn from_tsv(text: &str) -> Result<Self, SimError> {
        let mut lists: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (sc, word) = line
                .split_once('\t')
                .ok_or_else(|| SimError::Lexicon(format!("line {}: expected sub_concept<TAB>word", i + 1)))?;
            lists.entry(sc.trim().to_string()).or_default().push(crate::kb::normalize_word(word));
        }
        Self::new(lists)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (sc, words) in &self.lists {
            for w in words {
                out.push_str(&format!("{sc}\t{w}\n"));
            }
        }
        out
    }

    /// Keeps the `n` closest neighbors of every sub-concept.
    pub fn truncated(&self, n: usize) -> Result<Self, SimError> {
        if let Some((sc, l)) = self.lists.iter().find(|(_, l)| l.len() < n) {
            return Err(SimError::Lexicon(format!("'{sc}' has {} words, {n} requested", l.len())));
        }
        Self::new(self.lists.iter().map(|(k, v)| (k.clone(), v[..n].to_vec())).collect())
    }

    pub fn sub_concepts(&self) -> impl Iterator<Item = &str> {
        self.lists.keys().map(String::as_str)
    }

    pub fn words(&self, sc: &str) -> Option<&[String]> {
        self.lists.get(sc).map(Vec::as_slice)
    }

    pub fn gold_of(&self, word: &str) -> Option<&str> {
        self.lists.iter().find(|(_, l)| l.iter().any(|w| w == word)).map(|(k, _)| k.as_str())
    }

    /// Smallest list length.
    pub fn vocab_size(&self) -> usize {
        self.lists.values().map(Vec::len).min().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdfShape {
    InvLog,
    InvN,
    InvN2,
}

impl PdfShape {
    pub const ALL: [PdfShape; 3] = [PdfShape::InvLog, PdfShape::InvN, PdfShape::InvN2];

    pub fn as_str(self) -> &'static str {
        match self {
            PdfShape::InvLog => "inv_log",
            PdfShape::InvN => "inv_n",
            PdfShape::InvN2 => "inv_n2",
        }
    }

    /// Unnormalized weight of rank `n`; ranks are offset so rank 0 is finite.
    pub fn weight(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            PdfShape::InvLog => 1.0 / (n + 2.0).ln(),
            PdfShape::InvN => 1.0 / (n + 1.0),
            PdfShape::InvN2 => 1.0 / ((n + 1.0) * (n + 1.0)),
        }
    }
}

/// A rank distribution over `[0, n)`.
#[derive(Debug, Clone)]
pub struct VocabularyPdf {
    pub shape: PdfShape,
    probabilities: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl VocabularyPdf {
    pub fn new(shape: PdfShape, n: usize) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::Config("vocabulary size must be positive".into()));
        }
        let weights: Vec<f64> = (0..n).map(|i| shape.weight(i)).collect();
        let total: f64 = weights.iter().sum();
        let index = WeightedIndex::new(&weights).map_err(|e| SimError::Config(e.to_string()))?;
        Ok(Self { shape, probabilities: weights.iter().map(|w| w / total).collect(), index })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn sample_rank<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_lists_are_disjoint() {
        let lex = NeighborLexicon::synthetic(MAX_VOCAB).unwrap();
        assert_eq!(lex.vocab_size(), MAX_VOCAB);
        assert_eq!(lex.sub_concepts().count(), 5);
        assert_eq!(lex.gold_of("pizzachart"), Some("piechart"));
        let small = lex.truncated(5).unwrap();
        assert_eq!(small.words("table").unwrap().len(), 5);
        assert_eq!(NeighborLexicon::from_tsv(&small.to_tsv()).unwrap(), small);
    }

    #[test]
    fn rejects_bad_lexicons() {
        assert!(NeighborLexicon::from_tsv("table\tx\npiechart\tx\n").is_err());
        assert!(NeighborLexicon::from_tsv("table x\n").is_err());
        assert!(NeighborLexicon::synthetic(0).is_err());
        assert!(NeighborLexicon::synthetic(1001).is_err());
    }

    #[test]
    fn inv_n2_probabilities() {
        let pdf = VocabularyPdf::new(PdfShape::InvN2, 3).unwrap();
        let total = 1.0 + 0.25 + 1.0 / 9.0;
        for (p, w) in pdf.probabilities().iter().zip([1.0, 0.25, 1.0 / 9.0]) {
            assert!((p - w / total).abs() < 1e-15);
        }
    }
}
