//! Synthetic annotated command corpus: hand-written templates with lexicon substitution.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pos::tokenize;
use super::{ConceptLabel, TaggedCommand};

pub const TRAIN_SIZE: usize = 50;
pub const TEST_SIZE: usize = 25;

const TEMPLATES: &[&str] = &[
    "Please {act} a {obj} using {data} data and add it in the {pres} .",
    "{act} a {obj} about share performances using {data} data and include it in the {pres} presentation .",
    "Please {act} a {obj} using {data} data and add it in {pres} deck .",
    "Can you {act} a {obj} with the {data} dataset for the {pres} ?",
    "{act} the {obj} in {pres} using {data} data",
    "I need a {obj} of {data} in the {pres} , please {act} it",
    "{act} a {obj} for {data} and put it in {pres}",
    "{act} a {obj} about {data}",
    "could you {act} a new {obj} based on {data} numbers for {pres} ?",
    "{act} {data} {obj} in the {pres} deck",
    "Please {act} a {obj} showing {data} prices and add it to the {pres} .",
    "{filler}",
];

const ACTIONS: &[&str] = &[
    "create", "make", "generate", "build", "prepare", "produce", "draw", "plot", "update",
    "refresh", "modify", "delete", "remove",
];

const OBJECTS: &[&str] = &[
    "Piechart", "piechart", "pie chart", "pie graph", "barchart", "bar chart", "histogram",
    "linechart", "line chart", "line graph", "table", "CompanyBriefingDeck", "briefing deck",
    "company briefing deck",
];

const DATA: &[&str] = &[
    "Energy", "Finance", "Tesla", "Apple", "Retail", "Healthcare", "Technology", "Utilities",
    "market daily OHLC", "Tesla Motor", "Banking", "TSLA", "AAPL", "Peloton", "Ford",
];

const PRESENTATIONS: &[&str] = &[
    "weekly report", "weeklyreport", "share performance report", "quarterly review",
    "monthly update", "board pack", "client pitch book", "daily summary", "Q3 review",
    "investor update",
];

const FILLERS: &[&str] = &[
    "please do it now",
    "thanks , that looks great",
    "can you do that again ?",
    "ok do it now please",
    "hello there",
    "that is all for today , thanks",
    "please check it again",
    "yes please",
];

/// The two commands the parser is expected to handle out of the box.
pub const REFERENCE_COMMANDS: &[&str] = &[
    "Please create/ACTION a Piechart/OBJECT using Energy/DATA data and add it in the weekly/PRESENTATION report/PRESENTATION .",
    "Please create/ACTION a CompanyBriefingDeck/OBJECT using Finance/DATA data and add it in weeklyreport/PRESENTATION deck .",
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn instantiate(template: &str, rng: &mut ChaCha8Rng) -> TaggedCommand {
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    for (i, piece) in template.split_whitespace().enumerate() {
        let (phrase, label) = match piece {
            "{act}" => {
                let a = ACTIONS.choose(rng).unwrap();
                let a = if i == 0 && rng.gen_bool(0.5) { capitalize(a) } else { a.to_string() };
                (a, ConceptLabel::Action)
            }
            "{obj}" => (OBJECTS.choose(rng).unwrap().to_string(), ConceptLabel::Object),
            "{data}" => (DATA.choose(rng).unwrap().to_string(), ConceptLabel::Data),
            "{pres}" => (PRESENTATIONS.choose(rng).unwrap().to_string(), ConceptLabel::Presentation),
            "{filler}" => (FILLERS.choose(rng).unwrap().to_string(), ConceptLabel::Outside),
            literal => (literal.to_string(), ConceptLabel::Outside),
        };
        for t in tokenize(&phrase) {
            tokens.push(t);
            labels.push(label);
        }
    }
    TaggedCommand { tokens, labels }
}

/// Generates `train_size + test_size` distinct commands; the reference commands open the
/// training split and no test command also appears in training.
pub fn synthetic_corpus(train_size: usize, test_size: usize, seed: u64) -> (Vec<TaggedCommand>, Vec<TaggedCommand>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut all: Vec<TaggedCommand> = REFERENCE_COMMANDS
        .iter()
        .map(|l| reference_command(l))
        .collect();
    for c in &all {
        seen.insert(c.tokens.join(" "));
    }
    let mut k = 0usize;
    while all.len() < train_size + test_size {
        // cycle templates so every split sees each of them
        let t = TEMPLATES[k % TEMPLATES.len()];
        k += 1;
        let cmd = instantiate(t, &mut rng);
        if seen.insert(cmd.tokens.join(" ")) {
            all.push(cmd);
        }
    }
    let test = all.split_off(train_size.min(all.len()));
    (all, test)
}

fn reference_command(line: &str) -> TaggedCommand {
    let annotated: Vec<String> = line
        .split_whitespace()
        .map(|t| if t.contains('/') { t.to_string() } else { format!("{t}/OUTSIDE") })
        .collect();
    TaggedCommand::from_annotated(&annotated.join(" ")).expect("reference annotation is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_disjointness() {
        let (train, test) = synthetic_corpus(TRAIN_SIZE, TEST_SIZE, 42);
        assert_eq!(train.len(), 50);
        assert_eq!(test.len(), 25);
        let tr: HashSet<_> = train.iter().map(|c| c.tokens.join(" ")).collect();
        assert!(test.iter().all(|c| !tr.contains(&c.tokens.join(" "))));
        assert!(train.iter().chain(&test).all(|c| c.tokens.len() == c.labels.len()));
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(synthetic_corpus(10, 5, 1), synthetic_corpus(10, 5, 1));
        assert_ne!(synthetic_corpus(10, 5, 1), synthetic_corpus(10, 5, 2));
    }

    #[test]
    fn reference_commands_lead_training() {
        let (train, _) = synthetic_corpus(TRAIN_SIZE, TEST_SIZE, 0);
        assert_eq!(train[0].spans().iter().map(|s| s.text.as_str()).collect::<Vec<_>>(),
                   ["create", "Piechart", "Energy", "weekly report"]);
    }
}
