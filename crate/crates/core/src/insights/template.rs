//! Slot templates such as `<company share> averaged <rate>% daily return.`
//!
//! A slot is `<name>` or `<name:N>` where `N` overrides the number of decimals
//! used when the bound value is numeric (default 2).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::primitives::PrimitiveKind;
use super::InsightError;

pub const DEFAULT_DECIMALS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Literal(String),
    Slot { name: String, decimals: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsightTemplate {
    pub segments: Vec<Segment>,
    pub applicable_primitive: Option<PrimitiveKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    Text(String),
    Number(f64),
}

impl From<&str> for Binding {
    fn from(s: &str) -> Self {
        Binding::Text(s.to_string())
    }
}

impl From<String> for Binding {
    fn from(s: String) -> Self {
        Binding::Text(s)
    }
}

impl From<f64> for Binding {
    fn from(v: f64) -> Self {
        Binding::Number(v)
    }
}

impl InsightTemplate {
    pub fn parse(text: &str) -> Result<Self, InsightError> {
        let mut segments = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('<') {
            if open > 0 {
                segments.push(Segment::Literal(rest[..open].to_string()));
            }
            let after = &rest[open + 1..];
            let close = after
                .find('>')
                .ok_or_else(|| InsightError::Template(format!("unclosed slot in '{text}'")))?;
            let inner = &after[..close];
            if inner.is_empty() || inner.contains('<') {
                return Err(InsightError::Template(format!("malformed slot in '{text}'")));
            }
            let (name, decimals) = match inner.rsplit_once(':') {
                Some((n, d)) if d.chars().all(|c| c.is_ascii_digit()) && !d.is_empty() => {
                    (n.to_string(), Some(d.parse().expect("digits")))
                }
                _ => (inner.to_string(), None),
            };
            segments.push(Segment::Slot { name, decimals });
            rest = &after[close + 1..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Literal(rest.to_string()));
        }
        Ok(Self { segments, applicable_primitive: None })
    }

    pub fn for_primitive(mut self, kind: PrimitiveKind) -> Self {
        self.applicable_primitive = Some(kind);
        self
    }

    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot { name, .. } => Some(name.as_str()),
            Segment::Literal(_) => None,
        })
    }

    pub fn render(&self, bindings: &BTreeMap<String, Binding>) -> Result<String, InsightError> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot { name, decimals } => match bindings.get(name) {
                    Some(Binding::Text(t)) => out.push_str(t),
                    Some(Binding::Number(v)) => {
                        out.push_str(&format!("{:.*}", decimals.unwrap_or(DEFAULT_DECIMALS), v))
                    }
                    None => return Err(InsightError::UnboundSlot(name.clone())),
                },
            }
        }
        Ok(out)
    }
}

pub fn render_insight(template: &InsightTemplate, bindings: &BTreeMap<String, Binding>) -> Result<String, InsightError> {
    template.render(bindings)
}

/// Template file: `primitive<TAB>template` per line, `#` comments allowed.
pub fn parse_template_file(text: &str) -> Result<Vec<InsightTemplate>, InsightError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (prim, body) = line
            .split_once('\t')
            .ok_or_else(|| InsightError::Template(format!("line {}: expected primitive<TAB>template", i + 1)))?;
        let kind = PrimitiveKind::parse(prim.trim())
            .ok_or_else(|| InsightError::Template(format!("line {}: unknown primitive '{prim}'", i + 1)))?;
        out.push(InsightTemplate::parse(body)?.for_primitive(kind));
    }
    Ok(out)
}

pub fn default_templates() -> Vec<InsightTemplate> {
    parse_template_file(include_str!("../../data/insight_templates.tsv")).expect("bundled templates parse")
}
