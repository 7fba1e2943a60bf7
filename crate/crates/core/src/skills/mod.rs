//! Atomic skills build one slide, macro skills replay a list of intents.
//!
//! Skill-library JSON layout: `{macros:[{name, steps:[ResolvedIntent]}]}`.

mod analysis;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{build_slide, slide_title, Analysis, BuildInput};

use crate::deck::{ChartKind, Deck, DeckError, DeckParameters};
use crate::insights::{InsightError, InsightTemplate, ScoringConfig};
use crate::kb::{KbError, KnowledgeBase, OBJECT};
use crate::mapping::ResolvedIntent;
use crate::timeseries::{load_timeseries_csv, TimeSeries};

pub const BRIEFING_DECK: &str = "company_briefing_deck";
/// Placeholders substituted by the invocation when a macro runs.
pub const DATA_PLACEHOLDER: &str = "$data";
pub const PRESENTATION_PLACEHOLDER: &str = "$presentation";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkillError {
    #[error("NO_SUCH_SKILL: '{0}'")]
    NoSuchSkill(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("target not found: no slide titled '{0}'")]
    TargetNotFound(String),
    #[error("NAME_TAKEN: '{0}'")]
    NameTaken(String),
    #[error("nothing to save: the command history is empty")]
    NothingToSave,
    #[error("unknown action '{0}'")]
    UnknownAction(String),
    #[error("analysis '{analysis}' does not produce a {object}")]
    InvalidAnalysis { analysis: String, object: String },
    #[error("macro step {index} failed: {source}")]
    Step { index: usize, source: Box<SkillError> },
    #[error("skill library error: {0}")]
    Library(String),
    #[error(transparent)]
    Deck(#[from] DeckError),
    #[error(transparent)]
    Insight(#[from] InsightError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

impl SkillError {
    pub fn code(&self) -> &'static str {
        match self {
            SkillError::NoSuchSkill(_) => "NO_SUCH_SKILL",
            SkillError::Data(_) => "DATA_ERROR",
            SkillError::TargetNotFound(_) => "TARGET_NOT_FOUND",
            SkillError::NameTaken(_) => "NAME_TAKEN",
            SkillError::NothingToSave => "NOTHING_TO_SAVE",
            SkillError::UnknownAction(_) => "UNKNOWN_ACTION",
            SkillError::InvalidAnalysis { .. } => "INVALID_ANALYSIS",
            SkillError::Step { source, .. } => source.code(),
            SkillError::Library(_) => "LIBRARY_ERROR",
            SkillError::Deck(_) => "DECK_ERROR",
            SkillError::Insight(_) => "INSIGHT_ERROR",
            SkillError::Kb(_) => "KB_ERROR",
        }
    }
}

pub trait Clock: Send + Sync {
    fn today(&self) -> NaiveDate;
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub NaiveDate);

impl Clock for FixedClock {
    fn today(&self) -> NaiveDate {
        self.0
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn today(&self) -> NaiveDate {
        chrono::Local::now().date_naive()
    }
}

pub trait DataSource: Send + Sync {
    fn load(&self, name: &str) -> Result<TimeSeries, SkillError>;
    fn names(&self) -> Vec<String>;
}

#[derive(Debug, Clone, Default)]
pub struct MemoryData {
    series: BTreeMap<String, TimeSeries>,
}

impl MemoryData {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, series: TimeSeries) {
        self.series.insert(series.name().to_string(), series);
    }
}

impl FromIterator<TimeSeries> for MemoryData {
    fn from_iter<I: IntoIterator<Item = TimeSeries>>(iter: I) -> Self {
        let mut d = MemoryData::new();
        iter.into_iter().for_each(|s| d.insert(s));
        d
    }
}

impl DataSource for MemoryData {
    fn load(&self, name: &str) -> Result<TimeSeries, SkillError> {
        self.series
            .get(name)
            .cloned()
            .ok_or_else(|| SkillError::Data(format!("dataset '{name}' not found")))
    }

    fn names(&self) -> Vec<String> {
        self.series.keys().cloned().collect()
    }
}

/// Datasets stored as `<dir>/<name>.csv`.
#[derive(Debug, Clone)]
pub struct DirectoryData {
    dir: PathBuf,
}

impl DirectoryData {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        Self { dir: dir.as_ref().to_path_buf() }
    }
}

impl DataSource for DirectoryData {
    fn load(&self, name: &str) -> Result<TimeSeries, SkillError> {
        if name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(SkillError::Data(format!("invalid dataset name '{name}'")));
        }
        let path = self.dir.join(format!("{name}.csv"));
        if !path.exists() {
            return Err(SkillError::Data(format!("dataset '{name}' not found")));
        }
        load_timeseries_csv(&path)
            .map(|s| s.with_name(name))
            .map_err(|e| SkillError::Data(e.to_string()))
    }

    fn names(&self) -> Vec<String> {
        let Ok(rd) = std::fs::read_dir(&self.dir) else { return Vec::new() };
        let mut names: Vec<String> = rd
            .filter_map(Result::ok)
            .filter_map(|e| {
                let p = e.path();
                (p.extension()? == "csv").then(|| p.file_stem()?.to_str().map(str::to_string))?
            })
            .collect();
        names.sort();
        names
    }
}

/// Everything a skill needs besides the intent and the deck.
pub struct SkillContext<'a> {
    pub data: &'a dyn DataSource,
    pub clock: &'a dyn Clock,
    pub params: &'a DeckParameters,
    pub templates: &'a [InsightTemplate],
    pub scoring: &'a ScoringConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicSkill {
    pub object_kind: ChartKind,
    /// Supported analyses, default first.
    pub analyses: Vec<Analysis>,
}

impl AtomicSkill {
    pub fn analysis_for(&self, intent: &ResolvedIntent) -> Result<Analysis, SkillError> {
        match intent.extra_params.get("analysis") {
            None => Ok(self.analyses[0]),
            Some(name) => Analysis::parse(name)
                .filter(|a| self.analyses.contains(a))
                .ok_or_else(|| SkillError::InvalidAnalysis { analysis: name.clone(), object: intent.object.clone() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroSkill {
    pub name: String,
    pub steps: Vec<ResolvedIntent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillLibrary {
    atomic: BTreeMap<String, AtomicSkill>,
    macros: BTreeMap<String, MacroSkill>,
}

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    macros: Vec<MacroSkill>,
}

pub fn briefing_deck_macro() -> MacroSkill {
    let steps = Analysis::ALL
        .into_iter()
        .map(|a| ResolvedIntent::new("create", a.object(), DATA_PLACEHOLDER, PRESENTATION_PLACEHOLDER).with_param("analysis", a.as_str()))
        .collect();
    MacroSkill { name: BRIEFING_DECK.into(), steps }
}

impl Default for SkillLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

impl SkillLibrary {
    pub fn builtin() -> Self {
        let atomic = [ChartKind::Piechart, ChartKind::Barchart, ChartKind::Linechart, ChartKind::Table]
            .into_iter()
            .map(|k| (k.as_str().to_string(), AtomicSkill { object_kind: k, analyses: Analysis::for_object(k.as_str()) }))
            .collect();
        let mut macros = BTreeMap::new();
        macros.insert(BRIEFING_DECK.to_string(), briefing_deck_macro());
        Self { atomic, macros }
    }

    pub fn atomic(&self, object: &str) -> Option<&AtomicSkill> {
        self.atomic.get(object)
    }

    pub fn get_macro(&self, name: &str) -> Option<&MacroSkill> {
        self.macros.get(name)
    }

    pub fn macros(&self) -> impl Iterator<Item = &MacroSkill> {
        self.macros.values()
    }

    pub fn atomic_names(&self) -> impl Iterator<Item = &str> {
        self.atomic.keys().map(String::as_str)
    }

    pub fn is_macro(&self, object: &str) -> bool {
        self.macros.contains_key(object)
    }

    pub fn to_json(&self) -> String {
        let file = LibraryFile { macros: self.macros.values().cloned().collect() };
        serde_json::to_string_pretty(&file).expect("library serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SkillError> {
        let file: LibraryFile = serde_json::from_str(text).map_err(|e| SkillError::Library(e.to_string()))?;
        let mut lib = Self::builtin();
        lib.macros.clear();
        for m in file.macros {
            if lib.macros.contains_key(&m.name) || lib.atomic.contains_key(&m.name) {
                return Err(SkillError::Library(format!("duplicate skill name '{}'", m.name)));
            }
            if let Some(s) = m.steps.iter().find(|s| !lib.atomic.contains_key(&s.object)) {
                return Err(SkillError::Library(format!("macro '{}' references unknown skill '{}'", m.name, s.object)));
            }
            lib.macros.insert(m.name.clone(), m);
        }
        lib.macros.entry(BRIEFING_DECK.into()).or_insert_with(briefing_deck_macro);
        Ok(lib)
    }

    /// Makes every macro an object sub-concept known to the KB.
    pub fn register_in(&self, kb: &mut KnowledgeBase) -> Result<(), SkillError> {
        for name in self.macros.keys() {
            if !kb.ontology().sub_concepts(OBJECT)?.contains(name) {
                kb.extend_ontology(OBJECT, name)?;
                kb.learn(OBJECT, name, name)?;
            }
        }
        Ok(())
    }

    /// Saves a command history as a macro. Macro invocations in the history are
    /// expanded so every stored step names an atomic skill.
    pub fn record_macro(&mut self, history: &[ResolvedIntent], name: &str, kb: &mut KnowledgeBase) -> Result<&MacroSkill, SkillError> {
        let name = crate::kb::normalize_word(name).replace(' ', "_");
        if history.is_empty() {
            return Err(SkillError::NothingToSave);
        }
        if name.is_empty() || self.macros.contains_key(&name) || self.atomic.contains_key(&name) || kb.ontology().owner_of(&name).is_some() {
            return Err(SkillError::NameTaken(name));
        }
        let mut steps = Vec::new();
        for intent in history {
            if let Some(m) = self.macros.get(&intent.object) {
                steps.extend(m.steps.iter().map(|s| bind_step(s, intent)));
            } else if self.atomic.contains_key(&intent.object) {
                steps.push(intent.clone());
            } else {
                return Err(SkillError::NoSuchSkill(intent.object.clone()));
            }
        }
        kb.extend_ontology(OBJECT, &name)?;
        kb.learn(OBJECT, &name, &name)?;
        if name.contains('_') {
            kb.learn(OBJECT, &name.replace('_', " "), &name)?;
        }
        self.macros.insert(name.clone(), MacroSkill { name: name.clone(), steps });
        Ok(&self.macros[&name])
    }
}

/// A macro step with the invocation's dataset and deck substituted in.
/// Non-create invocations (update, delete) override the step's action.
pub fn bind_step(step: &ResolvedIntent, invocation: &ResolvedIntent) -> ResolvedIntent {
    let mut s = step.clone();
    s.data_ref = invocation.data_ref.clone();
    s.presentation = invocation.presentation.clone();
    if invocation.action != "create" {
        s.action = invocation.action.clone();
    }
    for (k, v) in &invocation.extra_params {
        if k != "analysis" {
            s.extra_params.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }
    s
}

fn load_peers(ctx: &SkillContext<'_>, subject: &str) -> Vec<TimeSeries> {
    ctx.params
        .comparable_firms
        .iter()
        .filter(|f| f.as_str() != subject)
        .filter_map(|f| match ctx.data.load(f) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("comparable firm skipped: {e}");
                None
            }
        })
        .collect()
}

fn slide_index(deck: &Deck, title: &str) -> Result<usize, SkillError> {
    deck.slides
        .iter()
        .position(|s| s.title == title)
        .ok_or_else(|| SkillError::TargetNotFound(title.to_string()))
}

/// Runs one atomic skill against `deck` and returns the updated deck.
pub fn execute_atomic(lib: &SkillLibrary, intent: &ResolvedIntent, deck: &Deck, ctx: &SkillContext<'_>) -> Result<Deck, SkillError> {
    let skill = lib.atomic(&intent.object).ok_or_else(|| SkillError::NoSuchSkill(intent.object.clone()))?;
    let analysis = skill.analysis_for(intent)?;
    let title = slide_title(&intent.data_ref, analysis);
    let mut out = deck.clone();
    out.parameters = ctx.params.clone();
    let build = || -> Result<_, SkillError> {
        let subject = ctx.data.load(&intent.data_ref)?;
        let peers = load_peers(ctx, &intent.data_ref);
        let input = BuildInput {
            subject: &subject,
            peers: &peers,
            params: ctx.params,
            date: ctx.clock.today(),
            templates: ctx.templates,
            scoring: ctx.scoring,
        };
        build_slide(analysis, &input)
    };
    match intent.action.as_str() {
        "create" => out.slides.push(build()?),
        "update" => {
            let i = slide_index(&out, &title)?;
            out.slides[i] = build()?;
        }
        "delete" => {
            let i = slide_index(&out, &title)?;
            out.slides.remove(i);
        }
        other => return Err(SkillError::UnknownAction(other.to_string())),
    }
    Ok(out)
}

/// Runs every step of a macro, all-or-nothing.
pub fn execute_macro(lib: &SkillLibrary, invocation: &ResolvedIntent, deck: &Deck, ctx: &SkillContext<'_>) -> Result<Deck, SkillError> {
    let m = lib.get_macro(&invocation.object).ok_or_else(|| SkillError::NoSuchSkill(invocation.object.clone()))?;
    let mut out = deck.clone();
    out.parameters = ctx.params.clone();
    for (index, step) in m.steps.iter().enumerate() {
        out = execute_atomic(lib, &bind_step(step, invocation), &out, ctx)
            .map_err(|e| SkillError::Step { index, source: Box::new(e) })?;
    }
    Ok(out)
}

/// Dispatches to a macro or an atomic skill by the intent's object.
pub fn execute_intent(lib: &SkillLibrary, intent: &ResolvedIntent, deck: &Deck, ctx: &SkillContext<'_>) -> Result<Deck, SkillError> {
    if lib.is_macro(&intent.object) {
        execute_macro(lib, intent, deck, ctx)
    } else {
        execute_atomic(lib, intent, deck, ctx)
    }
}
