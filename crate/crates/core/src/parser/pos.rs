//! Tokenizer and a lexicon-plus-suffix-rules part-of-speech tagger.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::ParseError;

const LEXICON: &str = include_str!("../../data/pos_lexicon.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Noun,
    Verb,
    Adj,
    Adv,
    Det,
    Adp,
    Pron,
    Conj,
    Prt,
    Num,
    Intj,
    Punct,
}

impl Pos {
    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Verb => "VERB",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Det => "DET",
            Pos::Adp => "ADP",
            Pos::Pron => "PRON",
            Pos::Conj => "CONJ",
            Pos::Prt => "PRT",
            Pos::Num => "NUM",
            Pos::Intj => "INTJ",
            Pos::Punct => "PUNCT",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "NOUN" => Pos::Noun,
            "VERB" => Pos::Verb,
            "ADJ" => Pos::Adj,
            "ADV" => Pos::Adv,
            "DET" => Pos::Det,
            "ADP" => Pos::Adp,
            "PRON" => Pos::Pron,
            "CONJ" => Pos::Conj,
            "PRT" => Pos::Prt,
            "NUM" => Pos::Num,
            "INTJ" => Pos::Intj,
            "PUNCT" => Pos::Punct,
            _ => return None,
        })
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn lexicon() -> &'static HashMap<String, Pos> {
    static LEX: OnceLock<HashMap<String, Pos>> = OnceLock::new();
    LEX.get_or_init(|| {
        let mut map = HashMap::new();
        for line in LEXICON.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tag, words) = line.split_once(':').expect("lexicon line has a tag");
            let pos = Pos::from_tag(tag.trim()).expect("known lexicon tag");
            for w in words.split_whitespace() {
                map.entry(w.to_string()).or_insert(pos);
            }
        }
        map
    })
}

pub fn lexicon_size() -> usize {
    lexicon().len()
}

fn is_punct_char(c: char) -> bool {
    matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | '\'' | '"' | '(' | ')' | '[' | ']' | '`')
}

/// Splits on whitespace, then peels leading and trailing punctuation off each chunk
/// as separate tokens. Inner punctuation (`Finance.csv`, `J&J`) stays attached.
pub fn tokenize(command: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in command.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_punct_char(chars[start]) {
            start += 1;
        }
        while end > start && is_punct_char(chars[end - 1]) {
            end -= 1;
        }
        tokens.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            tokens.push(chars[start..end].iter().collect());
        }
        tokens.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    tokens
}

pub fn tag_token(token: &str) -> Pos {
    let lower = token.to_lowercase();
    if let Some(p) = lexicon().get(&lower) {
        return *p;
    }
    if token.chars().all(|c| is_punct_char(c) || c == '-') {
        return Pos::Punct;
    }
    if token
        .trim_end_matches('%')
        .replace([',', '.'], "")
        .chars()
        .all(|c| c.is_ascii_digit())
        && token.chars().any(|c| c.is_ascii_digit())
    {
        return Pos::Num;
    }
    if lower.len() > 3 && lower.ends_with("ly") {
        return Pos::Adv;
    }
    if lower.len() > 4 && lower.ends_with("ing") {
        return Pos::Verb;
    }
    // capitalized unknowns and everything else default to nouns
    Pos::Noun
}

pub fn tokenize_and_pos(command: &str) -> Result<Vec<(String, Pos)>, ParseError> {
    let tokens = tokenize(command);
    if tokens.is_empty() {
        return Err(ParseError::EmptyCommand);
    }
    Ok(tokens
        .into_iter()
        .map(|t| {
            let p = tag_token(&t);
            (t, p)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_a_piechart() {
        let tagged = tokenize_and_pos("create a Piechart").unwrap();
        assert_eq!(
            tagged,
            vec![
                ("create".to_string(), Pos::Verb),
                ("a".to_string(), Pos::Det),
                ("Piechart".to_string(), Pos::Noun)
            ]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert_eq!(tokenize_and_pos("").unwrap_err(), ParseError::EmptyCommand);
        assert_eq!(tokenize_and_pos("  \t ").unwrap_err(), ParseError::EmptyCommand);
    }

    #[test]
    fn terminal_punctuation_is_detached() {
        let tagged = tokenize_and_pos("weekly report.").unwrap();
        let toks: Vec<_> = tagged.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(toks, ["weekly", "report", "."]);
        assert_eq!(tagged[2].1, Pos::Punct);
    }

    #[test]
    fn quotes_and_inner_punctuation() {
        assert_eq!(tokenize("'share report'"), ["'", "share", "report", "'"]);
        assert_eq!(tokenize("Finance.csv, J&J!"), ["Finance.csv", ",", "J&J", "!"]);
    }

    #[test]
    fn suffix_rules() {
        assert_eq!(tag_token("swiftly"), Pos::Adv);
        assert_eq!(tag_token("forecasting"), Pos::Verb);
        assert_eq!(tag_token("Zorblax"), Pos::Noun);
        assert_eq!(tag_token("zorblax"), Pos::Noun);
        assert_eq!(tag_token("2019"), Pos::Num);
        assert_eq!(tag_token("Please"), Pos::Intj);
    }

    #[test]
    fn lexicon_has_about_five_hundred_words() {
        assert!((450..=700).contains(&lexicon_size()), "{}", lexicon_size());
    }
}
