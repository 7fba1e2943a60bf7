//! The conversational loop over a workspace of KB, skills, decks and datasets.
//!
//! A workspace is either in-memory or backed by a directory:
//!
//! ```text
//! kb.json  skills.json  aliases.json  params.json  state.json  model.json
//! decks/<slug>.json   datasets/<NAME>.csv
//! ```
//!
//! Atomic commands run immediately. Macro commands are staged and run on
//! "Run the analysis", which rebuilds the macro's slides with the session's
//! current parameters, so running twice without edits leaves the deck unchanged.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deck::{parse_deck, serialize_deck, Deck, DeckParameters};
use crate::insights::{default_templates, parse_template_file, InsightTemplate, ScoringConfig};
use crate::kb::{KbError, KnowledgeBase, Variant};
use crate::mapping::{
    apply_clarification, is_run_trigger, recognize_edits, resolve_with, update_parameters, AliasTable, ClarificationRequest,
    MappingError, Resolution, ResolvedIntent, SessionState,
};
use crate::parser::corpus::{synthetic_corpus, TEST_SIZE, TRAIN_SIZE};
use crate::parser::{tag_command, train_tagger, CrfModel, ParseError};
use crate::render::{render_html, RenderError, RenderOptions};
use crate::skills::{
    bind_step, execute_intent, slide_title, Analysis, Clock, DataSource, DirectoryData, MemoryData, SkillContext, SkillError,
    SkillLibrary, SystemClock,
};
use crate::timeseries::{synthetic_ohlcv, timeseries_to_csv, TimeSeries};

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("unknown deck '{0}'")]
    UnknownDeck(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid workspace file {path}: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> WorkspaceError {
    WorkspaceError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub session_id: String,
    pub user_text: String,
    pub reply_text: String,
    pub clarification: Option<ClarificationRequest>,
    pub deck_version: u64,
    /// Machine-readable code when the message could not be carried out.
    pub error_code: Option<String>,
    /// Deck touched by this turn, if any.
    pub deck: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Session {
    pub id: String,
    pub state: SessionState,
    pub staged: Option<ResolvedIntent>,
    pub history: Vec<ResolvedIntent>,
    pub transcript: Vec<ChatTurn>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct StateFile {
    deck_version: u64,
}

/// Demo tickers generated when a workspace starts without datasets.
pub const DEMO_DATASETS: &[(&str, f64)] = &[
    ("TSLA", 180.0),
    ("AAPL", 150.0),
    ("F", 12.0),
    ("GM", 35.0),
    ("PTON", 8.0),
    ("NIO", 9.0),
    ("Energy", 90.0),
    ("Finance", 40.0),
];

pub fn demo_datasets() -> Vec<TimeSeries> {
    let start = NaiveDate::from_ymd_opt(2023, 1, 2).expect("valid date");
    DEMO_DATASETS
        .iter()
        .enumerate()
        .map(|(i, (name, price))| synthetic_ohlcv(name, start, 340, *price, 100 + i as u64))
        .collect()
}

/// The parser model shipped with a fresh workspace: trained on the full synthetic corpus.
pub fn default_parser_model() -> CrfModel {
    let (mut train, test) = synthetic_corpus(TRAIN_SIZE, TEST_SIZE, 7);
    train.extend(test);
    train_tagger(&train, 50, 0.01, 1).expect("synthetic corpus is valid")
}

pub fn deck_slug(name: &str) -> String {
    let s: String = name
        .trim()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if s.is_empty() { "deck".into() } else { s }
}

fn record_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(?:save|record)\b(?:.*?\blast\s+(\d+)\s+commands?)?.*?\bas\s+([A-Za-z][\w-]*)\s*[.!]?\s*$").expect("valid regex")
    })
}

pub struct Workspace {
    root: Option<PathBuf>,
    kb: KnowledgeBase,
    library: SkillLibrary,
    aliases: AliasTable,
    model: CrfModel,
    data: Box<dyn DataSource>,
    clock: Box<dyn Clock>,
    templates: Vec<InsightTemplate>,
    scoring: ScoringConfig,
    decks: BTreeMap<String, Deck>,
    saved_params: DeckParameters,
    deck_version: u64,
    sessions: BTreeMap<String, Session>,
    next_session: u64,
}

impl Workspace {
    /// An in-memory workspace with nothing persisted.
    pub fn in_memory(data: MemoryData, model: CrfModel, variant: Variant) -> Self {
        let mut ws = Self {
            root: None,
            kb: KnowledgeBase::seeded(variant),
            library: SkillLibrary::builtin(),
            aliases: AliasTable::default(),
            model,
            data: Box::new(data),
            clock: Box::new(SystemClock),
            templates: default_templates(),
            scoring: ScoringConfig::default(),
            decks: BTreeMap::new(),
            saved_params: DeckParameters::default(),
            deck_version: 0,
            sessions: BTreeMap::new(),
            next_session: 1,
        };
        ws.library.register_in(&mut ws.kb).expect("builtin macros fit the default ontology");
        ws.refresh_datasets();
        ws
    }

    /// Opens a workspace directory, creating any missing file with defaults
    /// (demo datasets, seeded KB, trained parser).
    pub fn open(root: impl AsRef<Path>, variant: Variant) -> Result<Self, WorkspaceError> {
        let root = root.as_ref().to_path_buf();
        for dir in [root.clone(), root.join("decks"), root.join("datasets")] {
            fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        let data = DirectoryData::new(root.join("datasets"));
        if data.names().is_empty() {
            for s in demo_datasets() {
                let p = root.join("datasets").join(format!("{}.csv", s.name()));
                fs::write(&p, timeseries_to_csv(&s)).map_err(|e| io_err(&p, e))?;
            }
        }

        let read = |name: &str| -> Result<Option<String>, WorkspaceError> {
            let p = root.join(name);
            match fs::read_to_string(&p) {
                Ok(s) => Ok(Some(s)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(io_err(&p, e)),
            }
        };
        let invalid = |name: &str, e: &dyn std::fmt::Display| WorkspaceError::Invalid {
            path: root.join(name).display().to_string(),
            message: e.to_string(),
        };

        let mut kb = match read("kb.json")? {
            Some(t) => KnowledgeBase::from_json(&t)?,
            None => KnowledgeBase::seeded(variant),
        };
        let library = match read("skills.json")? {
            Some(t) => SkillLibrary::from_json(&t)?,
            None => SkillLibrary::builtin(),
        };
        library.register_in(&mut kb)?;
        let aliases = match read("aliases.json")? {
            Some(t) => AliasTable::from_json(&t).map_err(|e| invalid("aliases.json", &e))?,
            None => AliasTable::default(),
        };
        let saved_params: DeckParameters = match read("params.json")? {
            Some(t) => serde_json::from_str(&t).map_err(|e| invalid("params.json", &e))?,
            None => DeckParameters::default(),
        };
        saved_params.validate().map_err(|e| invalid("params.json", &e))?;
        let state: StateFile = match read("state.json")? {
            Some(t) => serde_json::from_str(&t).map_err(|e| invalid("state.json", &e))?,
            None => StateFile::default(),
        };
        let model = match read("model.json")? {
            Some(t) => CrfModel::from_json(&t)?,
            None => {
                log::info!("no parser model in workspace, training the default one");
                let m = default_parser_model();
                let p = root.join("model.json");
                fs::write(&p, m.to_json()).map_err(|e| io_err(&p, e))?;
                m
            }
        };
        let scoring = match read("scoring.json")? {
            Some(t) => ScoringConfig::from_json(&t).map_err(|e| invalid("scoring.json", &e))?,
            None => ScoringConfig::default(),
        };
        let templates = match read("templates.tsv")? {
            Some(t) => parse_template_file(&t).map_err(|e| invalid("templates.tsv", &e))?,
            None => default_templates(),
        };

        let mut decks = BTreeMap::new();
        let deck_dir = root.join("decks");
        let entries = fs::read_dir(&deck_dir).map_err(|e| io_err(&deck_dir, e))?;
        let mut paths: Vec<PathBuf> = entries.filter_map(Result::ok).map(|e| e.path()).collect();
        paths.sort();
        for p in paths.into_iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
            let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
            let deck = parse_deck(&text).map_err(|e| WorkspaceError::Invalid { path: p.display().to_string(), message: e.to_string() })?;
            decks.insert(deck.name.clone(), deck);
        }

        let mut ws = Self {
            root: Some(root),
            kb,
            library,
            aliases,
            model,
            data: Box::new(data),
            clock: Box::new(SystemClock),
            templates,
            scoring,
            decks,
            saved_params,
            deck_version: state.deck_version,
            sessions: BTreeMap::new(),
            next_session: 1,
        };
        ws.refresh_datasets();
        ws.persist_all()?;
        Ok(ws)
    }

    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn library(&self) -> &SkillLibrary {
        &self.library
    }

    pub fn aliases(&self) -> &AliasTable {
        &self.aliases
    }

    pub fn model(&self) -> &CrfModel {
        &self.model
    }

    pub fn deck_version(&self) -> u64 {
        self.deck_version
    }

    pub fn deck(&self, name: &str) -> Option<&Deck> {
        self.decks.get(name)
    }

    pub fn deck_names(&self) -> impl Iterator<Item = &str> {
        self.decks.keys().map(String::as_str)
    }

    pub fn deck_html(&self, name: &str, opts: &RenderOptions) -> Result<String, WorkspaceError> {
        let deck = self.deck(name).ok_or_else(|| WorkspaceError::UnknownDeck(name.to_string()))?;
        Ok(render_html(deck, opts)?)
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn saved_parameters(&self) -> &DeckParameters {
        &self.saved_params
    }

    pub fn create_session(&mut self) -> String {
        let id = format!("session-{}", self.next_session);
        self.next_session += 1;
        let state = SessionState { deck_parameters: self.saved_params.clone(), ..Default::default() };
        self.sessions.insert(id.clone(), Session { id: id.clone(), state, ..Default::default() });
        id
    }

    /// Replaces the KB wholesale; the file must hold a valid KB-JSON of either variant.
    pub fn replace_kb(&mut self, json: &str) -> Result<(), WorkspaceError> {
        let mut kb = KnowledgeBase::from_json(json)?;
        self.library.register_in(&mut kb)?;
        self.kb = kb;
        self.persist_kb()
    }

    fn refresh_datasets(&mut self) {
        self.aliases.datasets = self.data.names().into_iter().collect();
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), WorkspaceError> {
        let Some(root) = &self.root else { return Ok(()) };
        let p = root.join(name);
        // write-then-rename keeps the previous file intact if the process dies mid-write
        let tmp = p.with_extension("tmp");
        fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &p).map_err(|e| io_err(&p, e))
    }

    fn persist_kb(&self) -> Result<(), WorkspaceError> {
        self.write("kb.json", &self.kb.to_json())?;
        self.write("aliases.json", &self.aliases.to_json())
    }

    fn persist_all(&self) -> Result<(), WorkspaceError> {
        self.persist_kb()?;
        self.write("skills.json", &self.library.to_json())?;
        self.write("params.json", &serde_json::to_string_pretty(&self.saved_params).expect("params serialize"))?;
        self.write("state.json", &serde_json::to_string_pretty(&StateFile { deck_version: self.deck_version }).expect("state serializes"))
    }

    fn store_deck(&mut self, deck: Deck) -> Result<bool, WorkspaceError> {
        let changed = self.decks.get(&deck.name).map(serialize_deck) != Some(serialize_deck(&deck));
        if changed {
            self.deck_version += 1;
            self.write(&format!("decks/{}.json", deck_slug(&deck.name)), &serialize_deck(&deck))?;
            self.write("state.json", &serde_json::to_string_pretty(&StateFile { deck_version: self.deck_version }).expect("state serializes"))?;
            self.decks.insert(deck.name.clone(), deck);
        }
        Ok(changed)
    }

    fn execute(&mut self, intent: &ResolvedIntent, params: &DeckParameters, base: Option<Deck>) -> Result<(Deck, bool), WorkspaceError> {
        let deck = base.unwrap_or_else(|| self.decks.get(&intent.presentation).cloned().unwrap_or_else(|| Deck::new(&intent.presentation)));
        let ctx = SkillContext {
            data: self.data.as_ref(),
            clock: self.clock.as_ref(),
            params,
            templates: &self.templates,
            scoring: &self.scoring,
        };
        let updated = execute_intent(&self.library, intent, &deck, &ctx)?;
        let changed = self.store_deck(updated.clone())?;
        Ok((updated, changed))
    }

    /// Handles one chat message. Only an unknown session is an `Err`; every other
    /// failure is reported in the turn's reply with an error code and leaves the
    /// session as it was.
    pub fn handle_message(&mut self, session_id: &str, text: &str) -> Result<ChatTurn, WorkspaceError> {
        let mut session = self.sessions.remove(session_id).ok_or_else(|| WorkspaceError::UnknownSession(session_id.to_string()))?;
        self.refresh_datasets();
        let backup = session.clone();
        let outcome = self.dispatch(&mut session, text);
        let mut turn = ChatTurn {
            session_id: session_id.to_string(),
            user_text: text.to_string(),
            reply_text: String::new(),
            clarification: None,
            deck_version: 0,
            error_code: None,
            deck: None,
        };
        match outcome {
            Ok(reply) => {
                turn.reply_text = reply.text;
                turn.clarification = reply.clarification;
                turn.deck = reply.deck;
            }
            Err((code, message)) => {
                let pending = session.state.pending.clone();
                session = Session { transcript: session.transcript, ..backup };
                if code == "INVALID_CHOICE" {
                    session.state.pending = pending.clone();
                }
                turn.clarification = session.state.pending.clone();
                turn.reply_text = format!("[{code}] {message}");
                turn.error_code = Some(code);
            }
        }
        turn.deck_version = self.deck_version;
        session.transcript.push(turn.clone());
        self.sessions.insert(session_id.to_string(), session);
        Ok(turn)
    }

    fn dispatch(&mut self, session: &mut Session, text: &str) -> Result<Reply, (String, String)> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(("EMPTY_COMMAND".into(), "say something like 'create a piechart using TSLA data'".into()));
        }
        if is_run_trigger(trimmed) {
            return self.run_analysis(session).map_err(ws_code);
        }
        if let Some(c) = record_re().captures(trimmed) {
            return self.record(session, c.get(1).map(|m| m.as_str()), &c[2]).map_err(ws_code);
        }
        if session.state.pending.is_some() {
            let answer = apply_clarification(&mut session.state, trimmed, &mut self.kb, &mut self.aliases);
            match answer {
                Ok(r) => {
                    self.persist_kb().map_err(ws_code)?;
                    return self.on_resolution(session, r, trimmed);
                }
                // a longer message is a new command rather than an answer
                Err(MappingError::InvalidChoice { .. }) if trimmed.split_whitespace().count() >= 3 => {
                    session.state.pending = None;
                    session.state.partial = None;
                }
                Err(e) => return Err(map_code(e)),
            }
        }
        if let Some(edits) = recognize_edits(trimmed, &self.aliases) {
            let (p, warnings) = update_parameters(&mut session.state, &edits).map_err(map_code)?;
            self.saved_params = p.clone();
            self.write("params.json", &serde_json::to_string_pretty(&p).expect("params serialize")).map_err(ws_code)?;
            let mut text = format!(
                "Parameters updated: comparables {}; horizon {} months; {} aggregation.",
                p.comparable_firms.join(", "),
                p.horizon_months,
                p.aggregation_metric.as_str()
            );
            for w in warnings {
                text.push_str(&format!(" Note: {w}."));
            }
            if session.staged.is_some() {
                text.push_str(" Say 'Run the analysis' to regenerate.");
            }
            return Ok(Reply::text(text));
        }
        let tagged = tag_command(&self.model, trimmed).map_err(|e| ("PARSE_ERROR".to_string(), e.to_string()))?;
        let r = resolve_with(&tagged, BTreeMap::new(), &self.kb, &self.aliases, &mut session.state).map_err(map_code)?;
        self.on_resolution(session, r, trimmed)
    }

    fn on_resolution(&mut self, session: &mut Session, r: Resolution, text: &str) -> Result<Reply, (String, String)> {
        let mut intent = match r {
            Resolution::Clarify(req) => {
                return Ok(Reply { text: req.question.clone(), clarification: Some(req), deck: None });
            }
            Resolution::Intent(i) => i,
        };
        if self.library.is_macro(&intent.object) && intent.action == "create" {
            let p = &session.state.deck_parameters;
            let reply = format!(
                "Ready to build {} for {} into deck '{}' with comparables {}, a {}-month horizon and weekly {}. \
                 Say 'Run the analysis' to launch it, or change the parameters first.",
                intent.object,
                intent.data_ref,
                intent.presentation,
                p.comparable_firms.join(", "),
                p.horizon_months,
                p.aggregation_metric.as_str()
            );
            session.staged = Some(intent);
            return Ok(Reply::text(reply));
        }
        if self.library.atomic(&intent.object).is_some() && !intent.extra_params.contains_key("analysis") {
            if let Some(a) = Analysis::detect(text, &intent.object) {
                intent.extra_params.insert("analysis".into(), a.as_str().into());
            }
        }
        let params = session.state.deck_parameters.clone();
        let (deck, changed) = self.execute(&intent, &params, None).map_err(ws_code)?;
        session.history.push(intent.clone());
        let what = match intent.action.as_str() {
            "create" => "Added",
            "update" => "Updated",
            _ => "Deleted",
        };
        let title = self
            .library
            .atomic(&intent.object)
            .and_then(|s| s.analysis_for(&intent).ok())
            .map(|a| slide_title(&intent.data_ref, a))
            .unwrap_or_else(|| intent.object.clone());
        let suffix = if changed { "" } else { " (no change)" };
        Ok(Reply {
            text: format!("{what} slide '{title}' in deck '{}' ({} slides){suffix}.", deck.name, deck.slides.len()),
            clarification: None,
            deck: Some(deck.name),
        })
    }

    /// Rebuilds the staged macro with current parameters, replacing its earlier slides.
    fn run_analysis(&mut self, session: &mut Session) -> Result<Reply, WorkspaceError> {
        let Some(staged) = session.staged.clone() else {
            return Err(WorkspaceError::Skill(SkillError::Data(
                "nothing to run yet; ask for a deck first, e.g. 'create a briefing deck about Tesla'".into(),
            )));
        };
        let params = session.state.deck_parameters.clone();
        let m = self.library.get_macro(&staged.object).ok_or_else(|| SkillError::NoSuchSkill(staged.object.clone()))?;
        let titles: Vec<String> = m
            .steps
            .iter()
            .map(|s| bind_step(s, &staged))
            .filter_map(|s| {
                let skill = self.library.atomic(&s.object)?;
                skill.analysis_for(&s).ok().map(|a| slide_title(&s.data_ref, a))
            })
            .collect();
        let mut base = self.decks.get(&staged.presentation).cloned().unwrap_or_else(|| Deck::new(&staged.presentation));
        base.slides.retain(|s| !titles.contains(&s.title));
        let (deck, changed) = self.execute(&staged, &params, Some(base))?;
        session.history.push(staged.clone());
        let state = if changed { format!("version {}", self.deck_version) } else { "unchanged".to_string() };
        Ok(Reply {
            text: format!("Built deck '{}' with {} slides ({state}).", deck.name, deck.slides.len()),
            clarification: None,
            deck: Some(deck.name),
        })
    }

    fn record(&mut self, session: &mut Session, last: Option<&str>, name: &str) -> Result<Reply, WorkspaceError> {
        let n = last.and_then(|s| s.parse::<usize>().ok()).unwrap_or(session.history.len());
        let start = session.history.len().saturating_sub(n);
        let steps = {
            let m = self.library.record_macro(&session.history[start..], name, &mut self.kb)?;
            m.steps.len()
        };
        self.write("skills.json", &self.library.to_json())?;
        self.persist_kb()?;
        Ok(Reply::text(format!(
            "Saved {steps} steps as '{}'. You can now ask for it like any other object.",
            crate::kb::normalize_word(name).replace(' ', "_")
        )))
    }
}

struct Reply {
    text: String,
    clarification: Option<ClarificationRequest>,
    deck: Option<String>,
}

impl Reply {
    fn text(text: String) -> Self {
        Self { text, clarification: None, deck: None }
    }
}

fn map_code(e: MappingError) -> (String, String) {
    (e.code().to_string(), e.to_string())
}

fn ws_code(e: WorkspaceError) -> (String, String) {
    let code = match &e {
        WorkspaceError::Skill(s) => s.code(),
        WorkspaceError::Kb(KbError::AlreadyMapped { .. }) => "ALREADY_MAPPED",
        WorkspaceError::Kb(_) => "KB_ERROR",
        WorkspaceError::Parse(_) => "PARSE_ERROR",
        WorkspaceError::Render(_) => "RENDER_ERROR",
        WorkspaceError::Io { .. } | WorkspaceError::Invalid { .. } => "IO_ERROR",
        WorkspaceError::UnknownSession(_) => "UNKNOWN_SESSION",
        WorkspaceError::UnknownDeck(_) => "UNKNOWN_DECK",
    };
    (code.to_string(), e.to_string())
}
