//! The output document model: decks of slides holding charts, insight bullets and tables.
//!
//! Deck-JSON layout:
//!
//! ```text
//! {name, parameters:{comparable_firms[], horizon_months, aggregation_metric},
//!  slides:[{title, date, objects:[{kind:"chart"|"insight"|"table", ...}]}]}
//! ```
//!
//! Every value is validated on construction paths that accept external input
//! ([`parse_deck`]) and by [`Deck::validate`].

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::Aggregation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeckError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Piechart,
    Barchart,
    Linechart,
    Table,
}

impl ChartKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChartKind::Piechart => "piechart",
            ChartKind::Barchart => "barchart",
            ChartKind::Linechart => "linechart",
            ChartKind::Table => "table",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "piechart" => Some(ChartKind::Piechart),
            "barchart" => Some(ChartKind::Barchart),
            "linechart" => Some(ChartKind::Linechart),
            "table" => Some(ChartKind::Table),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSeries {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_kind: ChartKind,
    pub title: String,
    pub series: Vec<DataSeries>,
    pub x_labels: Vec<String>,
}

impl ChartSpec {
    pub fn new(
        chart_kind: ChartKind,
        title: impl Into<String>,
        series: Vec<DataSeries>,
        x_labels: Vec<String>,
    ) -> Result<Self, DeckError> {
        let chart = Self { chart_kind, title: title.into(), series, x_labels };
        chart.validate()?;
        Ok(chart)
    }

    pub fn validate(&self) -> Result<(), DeckError> {
        let n = self.x_labels.len();
        if self.series.iter().any(|s| s.values.len() != n) {
            return Err(DeckError::Validation(
                "series lengths must equal x_labels length".into(),
            ));
        }
        if self.series.iter().flat_map(|s| &s.values).any(|v| !v.is_finite()) {
            return Err(DeckError::Validation("chart values must be finite".into()));
        }
        if self.chart_kind == ChartKind::Piechart {
            if self.series.len() != 1 {
                return Err(DeckError::Validation(
                    "piechart has exactly one series".into(),
                ));
            }
            if self.series[0].values.iter().any(|v| *v < 0.0) {
                return Err(DeckError::Validation("piechart values non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TableSpec {
    pub fn validate(&self) -> Result<(), DeckError> {
        if self.rows.iter().any(|r| r.len() != self.headers.len()) {
            return Err(DeckError::Validation("table rows must match header width".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SlideObject {
    Chart(ChartSpec),
    Insight { lines: Vec<String> },
    Table(TableSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slide {
    pub title: String,
    pub date: NaiveDate,
    pub objects: Vec<SlideObject>,
}

impl Slide {
    pub fn validate(&self) -> Result<(), DeckError> {
        if self.title.trim().is_empty() {
            return Err(DeckError::Validation("slide title non-empty".into()));
        }
        if self.objects.is_empty() {
            return Err(DeckError::Validation(format!(
                "slide '{}' has at least one object",
                self.title
            )));
        }
        for o in &self.objects {
            match o {
                SlideObject::Chart(c) => c.validate()?,
                SlideObject::Table(t) => t.validate()?,
                SlideObject::Insight { .. } => {}
            }
        }
        Ok(())
    }

    pub fn charts(&self) -> impl Iterator<Item = &ChartSpec> {
        self.objects.iter().filter_map(|o| match o {
            SlideObject::Chart(c) => Some(c),
            _ => None,
        })
    }

    pub fn insight_lines(&self) -> impl Iterator<Item = &String> {
        self.objects.iter().flat_map(|o| match o {
            SlideObject::Insight { lines } => lines.as_slice(),
            _ => &[],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeckParameters {
    pub comparable_firms: Vec<String>,
    pub horizon_months: u32,
    pub aggregation_metric: Aggregation,
}

impl Default for DeckParameters {
    fn default() -> Self {
        Self {
            comparable_firms: vec!["F".into(), "GM".into(), "PTON".into()],
            horizon_months: 3,
            aggregation_metric: Aggregation::Mean,
        }
    }
}

impl DeckParameters {
    pub fn validate(&self) -> Result<(), DeckError> {
        if self.horizon_months < 1 {
            return Err(DeckError::Validation("horizon_months >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deck {
    pub name: String,
    pub parameters: DeckParameters,
    pub slides: Vec<Slide>,
}

impl Deck {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), parameters: DeckParameters::default(), slides: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), DeckError> {
        if self.name.trim().is_empty() {
            return Err(DeckError::Validation("deck name non-empty".into()));
        }
        self.parameters.validate()?;
        self.slides.iter().try_for_each(Slide::validate)
    }
}

pub fn serialize_deck(deck: &Deck) -> String {
    serde_json::to_string_pretty(deck).expect("deck values are always serializable")
}

pub fn parse_deck(text: &str) -> Result<Deck, DeckError> {
    let deck: Deck = serde_json::from_str(text).map_err(|e| DeckError::Parse(e.to_string()))?;
    deck.validate()?;
    Ok(deck)
}
