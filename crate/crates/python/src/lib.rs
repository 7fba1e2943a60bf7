//! Python bindings. Structured results cross the boundary as plain dicts and lists
//! (built through the `json` module), so Python code never sees Rust types except
//! the handles defined here.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use deckforge::deck::{parse_deck, serialize_deck};
use deckforge::kb::{KnowledgeBase as CoreKb, Learned, Variant};
use deckforge::parser::corpus::synthetic_corpus as core_corpus;
use deckforge::parser::{evaluate_tagger, parse_corpus, tag_command, train_with_report, write_corpus, CrfModel, TrainConfig};
use deckforge::render::{render_html as core_render, RenderOptions, Theme};
use deckforge::sim::{run_experiment as core_run, ExperimentConfig};
use deckforge::skills::MemoryData;
use deckforge::workspace::{default_parser_model, demo_datasets, Workspace as CoreWorkspace};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn variant(name: &str) -> PyResult<Variant> {
    match name {
        "nkb" => Ok(Variant::Nkb),
        "rkb" => Ok(Variant::Rkb),
        other => Err(PyValueError::new_err(format!("variant must be 'nkb' or 'rkb', got '{other}'"))),
    }
}

fn theme(name: &str) -> PyResult<Theme> {
    match name {
        "light" => Ok(Theme::Light),
        "dark" => Ok(Theme::Dark),
        other => Err(PyValueError::new_err(format!("theme must be 'light' or 'dark', got '{other}'"))),
    }
}

fn to_py(py: Python<'_>, json: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (json,))?.unbind())
}

/// A chat workspace. `path=None` keeps everything in memory with the demo datasets.
#[pyclass(unsendable)]
pub struct Workspace {
    inner: CoreWorkspace,
}

#[pymethods]
impl Workspace {
    #[new]
    #[pyo3(signature = (path=None, variant="rkb"))]
    fn new(path: Option<PathBuf>, variant: &str) -> PyResult<Self> {
        let v = self::variant(variant)?;
        let inner = match path {
            Some(p) => CoreWorkspace::open(p, v).map_err(value_err)?,
            None => {
                let data: MemoryData = demo_datasets().into_iter().collect();
                CoreWorkspace::in_memory(data, default_parser_model(), v)
            }
        };
        Ok(Self { inner })
    }

    fn create_session(&mut self) -> String {
        self.inner.create_session()
    }

    /// Returns the chat turn as a dict. Recoverable problems are reported in
    /// `error_code`; an unknown session raises `KeyError`.
    fn send(&mut self, py: Python<'_>, session_id: &str, text: &str) -> PyResult<Py<PyAny>> {
        let turn = self.inner.handle_message(session_id, text).map_err(|e| PyKeyError::new_err(e.to_string()))?;
        to_py(py, &serde_json::to_string(&turn).map_err(value_err)?)
    }

    #[getter]
    fn deck_version(&self) -> u64 {
        self.inner.deck_version()
    }

    fn deck_names(&self) -> Vec<String> {
        self.inner.deck_names().map(str::to_string).collect()
    }

    fn deck(&self, py: Python<'_>, name: &str) -> PyResult<Py<PyAny>> {
        let deck = self.inner.deck(name).ok_or_else(|| PyKeyError::new_err(format!("no deck named '{name}'")))?;
        to_py(py, &serialize_deck(deck))
    }

    #[pyo3(signature = (name, theme="light", embed_data=false))]
    fn deck_html(&self, name: &str, theme: &str, embed_data: bool) -> PyResult<String> {
        let opts = RenderOptions { theme: self::theme(theme)?, embed_data, ..RenderOptions::default() };
        self.inner.deck_html(name, &opts).map_err(value_err)
    }

    fn kb(&self) -> KnowledgeBase {
        KnowledgeBase { inner: self.inner.kb().clone() }
    }

    fn replace_kb(&mut self, kb: &KnowledgeBase) -> PyResult<()> {
        self.inner.replace_kb(&kb.inner.to_json()).map_err(value_err)
    }

    fn skills(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.library().to_json())
    }
}

/// Word-to-sub-concept mappings; `nkb` keeps the first answer, `rkb` keeps beliefs.
#[pyclass]
pub struct KnowledgeBase {
    inner: CoreKb,
}

#[pymethods]
impl KnowledgeBase {
    /// A KB seeded with the default ontology and no learned words.
    #[new]
    #[pyo3(signature = (variant="rkb"))]
    fn new(variant: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreKb::seeded(self::variant(variant)?) })
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.inner.variant().as_str()
    }

    fn infer(&self, main_concept: &str, word: &str) -> PyResult<Option<String>> {
        Ok(self.inner.infer(main_concept, word).map_err(value_err)?.map(str::to_string))
    }

    /// Returns False when an `nkb` refuses to overwrite an existing mapping.
    fn learn(&mut self, main_concept: &str, word: &str, sub_concept: &str) -> PyResult<bool> {
        Ok(self.inner.learn(main_concept, word, sub_concept).map_err(value_err)? == Learned::Updated)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreKb::from_json(text).map_err(value_err)? })
    }
}

/// A trained command tagger.
#[pyclass]
pub struct Tagger {
    inner: CrfModel,
}

#[pymethods]
impl Tagger {
    /// Trains on a corpus in the annotated `token/LABEL` line format.
    #[staticmethod]
    #[pyo3(signature = (corpus, epochs=50, l2=0.01, seed=0))]
    fn train(py: Python<'_>, corpus: &str, epochs: usize, l2: f64, seed: u64) -> PyResult<Self> {
        let commands = parse_corpus(corpus).map_err(value_err)?;
        let cfg = TrainConfig { epochs, l2_lambda: l2, seed, ..TrainConfig::default() };
        let report = py.detach(|| train_with_report(&commands, &cfg)).map_err(value_err)?;
        Ok(Self { inner: report.model })
    }

    /// The model every new workspace starts with.
    #[staticmethod]
    fn default() -> Self {
        Self { inner: default_parser_model() }
    }

    /// `(token, label)` pairs for one command.
    fn tag(&self, command: &str) -> PyResult<Vec<(String, String)>> {
        let tagged = tag_command(&self.inner, command).map_err(value_err)?;
        Ok(tagged.tokens.into_iter().zip(tagged.labels).map(|(t, l)| (t, l.as_str().to_string())).collect())
    }

    /// Macro F1, precision and recall on an annotated corpus.
    fn evaluate(&self, corpus: &str) -> PyResult<(f64, f64, f64)> {
        let commands = parse_corpus(corpus).map_err(value_err)?;
        let ev = evaluate_tagger(&self.inner, &commands).map_err(value_err)?;
        Ok((ev.macro_f1, ev.precision, ev.recall))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: CrfModel::from_json(text).map_err(value_err)? })
    }
}

/// Annotated train and test corpora as text.
#[pyfunction]
#[pyo3(signature = (train=50, test=25, seed=7))]
fn synthetic_corpus(train: usize, test: usize, seed: u64) -> (String, String) {
    let (tr, te) = core_corpus(train, test, seed);
    (write_corpus(&tr), write_corpus(&te))
}

/// Renders deck-JSON to a standalone HTML page.
#[pyfunction]
#[pyo3(signature = (deck_json, theme="light", embed_data=false))]
fn render_html(deck_json: &str, theme: &str, embed_data: bool) -> PyResult<String> {
    let deck = parse_deck(deck_json).map_err(value_err)?;
    let opts = RenderOptions { theme: self::theme(theme)?, embed_data, ..RenderOptions::default() };
    core_render(&deck, &opts).map_err(value_err)
}

/// Runs the simulation grid. `config` is a JSON object; omitted fields take defaults.
#[pyfunction]
#[pyo3(signature = (config="{}"))]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<Py<PyAny>> {
    let overrides: serde_json::Value = serde_json::from_str(config).map_err(value_err)?;
    let mut merged: serde_json::Value = serde_json::from_str(&ExperimentConfig::default().to_json()).map_err(value_err)?;
    let fields = overrides.as_object().ok_or_else(|| PyValueError::new_err("config must be a JSON object"))?;
    for (k, v) in fields {
        if merged.get(k).is_none() {
            return Err(PyValueError::new_err(format!("unknown field '{k}'")));
        }
        merged[k] = v.clone();
    }
    let cfg = ExperimentConfig::from_json(&merged.to_string()).map_err(value_err)?;
    let result = py.detach(|| core_run(&cfg)).map_err(value_err)?;
    let cells: Vec<serde_json::Value> = result
        .cells
        .iter()
        .map(|c| {
            serde_json::json!({"alpha": c.alpha, "N": c.vocab_size, "pdf": c.pdf.as_str(),
                               "mean_diff": c.mean_diff, "stddev": c.stddev, "p_value": c.p_value,
                               "learning_curves": c.learning_curves})
        })
        .collect();
    to_py(py, &serde_json::json!({"cells": cells, "grid_csv": result.grid_csv()}).to_string())
}

#[pymodule]
#[pyo3(name = "deckforge")]
pub fn deckforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Workspace>()?;
    m.add_class::<KnowledgeBase>()?;
    m.add_class::<Tagger>()?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(render_html, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
