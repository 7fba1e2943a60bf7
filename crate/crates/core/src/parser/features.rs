use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::pos::Pos;

/// Rendered in place of a neighbour POS tag at either sentence edge.
pub const BOUNDARY: &str = "__BOUNDARY__";

/// Per-token observation features fed to the CRF.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFeatures {
    pub pos: Pos,
    /// `None` at the sentence start.
    pub prev_pos: Option<Pos>,
    /// `None` at the sentence end.
    pub next_pos: Option<Pos>,
    pub first_letter: String,
    pub last_letter: String,
    pub trunc_first: String,
    pub trunc_last: String,
    pub char_ngrams: BTreeSet<String>,
}

impl TokenFeatures {
    /// Flattens into the string keys the CRF weight table is indexed by.
    pub fn feature_keys(&self) -> Vec<String> {
        let edge = |p: Option<Pos>| p.map_or(BOUNDARY, Pos::as_str);
        let mut keys = vec![
            format!("pos={}", self.pos),
            format!("prev_pos={}", edge(self.prev_pos)),
            format!("next_pos={}", edge(self.next_pos)),
            format!("first={}", self.first_letter),
            format!("last={}", self.last_letter),
            format!("trunc_first={}", self.trunc_first),
            format!("trunc_last={}", self.trunc_last),
        ];
        keys.extend(self.char_ngrams.iter().map(|g| format!("ngram={g}")));
        keys
    }
}

pub fn char_ngrams(lower: &str) -> BTreeSet<String> {
    let chars: Vec<char> = lower.chars().collect();
    let mut out = BTreeSet::new();
    for n in [2, 3] {
        for w in chars.windows(n) {
            out.insert(w.iter().collect());
        }
    }
    out
}

pub fn featurize(tokens_with_pos: &[(String, Pos)]) -> Vec<TokenFeatures> {
    let n = tokens_with_pos.len();
    tokens_with_pos
        .iter()
        .enumerate()
        .map(|(i, (token, pos))| {
            let lower = token.to_lowercase();
            let chars: Vec<char> = lower.chars().collect();
            let (first, last) = match (chars.first(), chars.last()) {
                (Some(f), Some(l)) => (f.to_string(), l.to_string()),
                _ => (String::new(), String::new()),
            };
            TokenFeatures {
                pos: *pos,
                prev_pos: (i > 0).then(|| tokens_with_pos[i - 1].1),
                next_pos: (i + 1 < n).then(|| tokens_with_pos[i + 1].1),
                first_letter: first,
                last_letter: last,
                trunc_first: chars.iter().skip(1).collect(),
                trunc_last: chars[..chars.len().saturating_sub(1)].iter().collect(),
                char_ngrams: char_ngrams(&lower),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piechart_in_context() {
        let input = vec![
            ("with".to_string(), Pos::Adp),
            ("piechart".to_string(), Pos::Noun),
            ("draw".to_string(), Pos::Verb),
        ];
        let f = &featurize(&input)[1];
        assert_eq!(f.pos, Pos::Noun);
        assert_eq!(f.prev_pos, Some(Pos::Adp));
        assert_eq!(f.next_pos, Some(Pos::Verb));
        assert_eq!(f.first_letter, "p");
        assert_eq!(f.last_letter, "t");
        assert_eq!(f.trunc_first, "iechart");
        assert_eq!(f.trunc_last, "piechar");
        for g in ["pie", "pi", "ec", "ha", "rt", "cha", "art"] {
            assert!(f.char_ngrams.contains(g), "missing {g}");
        }
        assert!(f.char_ngrams.iter().all(|g| (2..=3).contains(&g.chars().count())));
    }

    #[test]
    fn single_token_uses_boundary_on_both_sides() {
        let f = featurize(&[("report".to_string(), Pos::Noun)]);
        assert_eq!(f[0].prev_pos, None);
        assert_eq!(f[0].next_pos, None);
        let keys = f[0].feature_keys();
        assert!(keys.contains(&format!("prev_pos={BOUNDARY}")));
        assert!(keys.contains(&format!("next_pos={BOUNDARY}")));
    }

    #[test]
    fn two_letter_token_has_one_ngram() {
        let f = featurize(&[("ab".to_string(), Pos::Noun)]);
        assert_eq!(f[0].char_ngrams, BTreeSet::from(["ab".to_string()]));
    }

    #[test]
    fn ngrams_are_lowercased() {
        let f = featurize(&[("PIE".to_string(), Pos::Noun)]);
        assert_eq!(
            f[0].char_ngrams,
            BTreeSet::from(["pi".to_string(), "ie".to_string(), "pie".to_string()])
        );
    }
}
