use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::kb::normalize_word;

/// Company-name to dataset aliases, kept apart from the belief KB because names are open-class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasTable {
    pub aliases: BTreeMap<String, String>,
    /// Dataset names currently loadable; not persisted with the aliases.
    #[serde(skip)]
    pub datasets: BTreeSet<String>,
}

impl Default for AliasTable {
    fn default() -> Self {
        let aliases = [
            ("apple", "AAPL"),
            ("peloton", "PTON"),
            ("tesla", "TSLA"),
            ("ford", "F"),
            ("general motors", "GM"),
            ("nio", "NIO"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Self { aliases, datasets: BTreeSet::new() }
    }
}

impl AliasTable {
    pub fn with_datasets<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.datasets.extend(names.into_iter().map(Into::into));
        self
    }

    /// A dataset name (case-insensitive) or an exact alias of one.
    pub fn resolve(&self, literal: &str) -> Option<String> {
        let key = normalize_word(literal);
        if key.is_empty() {
            return None;
        }
        if let Some(d) = self.datasets.iter().find(|d| d.to_lowercase() == key) {
            return Some(d.clone());
        }
        let target = self.aliases.get(&key)?;
        self.datasets
            .iter()
            .find(|d| d.eq_ignore_ascii_case(target))
            .cloned()
            .or_else(|| self.datasets.is_empty().then(|| target.clone()))
    }

    pub fn add(&mut self, name: &str, dataset: &str) {
        self.aliases.insert(normalize_word(name), dataset.to_string());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("aliases serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
