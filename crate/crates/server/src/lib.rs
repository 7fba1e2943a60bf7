//! HTTP front end for a deckforge workspace.
//!
//! All endpoints speak JSON except `GET /decks/{name}/html`. Errors come back as
//! `{"error": {"code": ..., "message": ...}}` with a matching status code.
//! `GET /sessions/{id}/events` is a server-sent event stream: one `hello` event
//! with the current deck version, then `turn` events for that session and
//! `deck` events whenever any deck changes.

use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast;
use tokio_stream::wrappers::BroadcastStream;

use deckforge::render::{RenderOptions, Theme};
use deckforge::sim::{run_experiment, ExperimentConfig};
use deckforge::workspace::{ChatTurn, Workspace, WorkspaceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ServerEvent {
    Hello { deck_version: u64 },
    Turn { turn: Box<ChatTurn> },
    Deck { deck: String, deck_version: u64 },
}

impl ServerEvent {
    fn name(&self) -> &'static str {
        match self {
            ServerEvent::Hello { .. } => "hello",
            ServerEvent::Turn { .. } => "turn",
            ServerEvent::Deck { .. } => "deck",
        }
    }

    fn visible_to(&self, session: &str) -> bool {
        match self {
            ServerEvent::Turn { turn } => turn.session_id == session,
            _ => true,
        }
    }
}

pub struct AppState {
    workspace: Mutex<Workspace>,
    events: broadcast::Sender<ServerEvent>,
}

impl AppState {
    pub fn new(workspace: Workspace) -> Arc<Self> {
        let (events, _) = broadcast::channel(256);
        Arc::new(Self { workspace: Mutex::new(workspace), events })
    }

    fn ws(&self) -> MutexGuard<'_, Workspace> {
        // a panic mid-request must not take the whole service down
        self.workspace.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServerEvent> {
        self.events.subscribe()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.into(), message: message.into() }
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        let (status, code) = match &e {
            WorkspaceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "UNKNOWN_SESSION"),
            WorkspaceError::UnknownDeck(_) => (StatusCode::NOT_FOUND, "UNKNOWN_DECK"),
            WorkspaceError::Kb(_) => (StatusCode::BAD_REQUEST, "KB_ERROR"),
            WorkspaceError::Render(_) => (StatusCode::UNPROCESSABLE_ENTITY, "RENDER_ERROR"),
            WorkspaceError::Skill(s) => (StatusCode::UNPROCESSABLE_ENTITY, s.code()),
            WorkspaceError::Parse(_) => (StatusCode::UNPROCESSABLE_ENTITY, "PARSE_ERROR"),
            WorkspaceError::Io { .. } | WorkspaceError::Invalid { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "IO_ERROR"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": {"code": self.code, "message": self.message}}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/events", get(session_events))
        .route("/decks", get(list_decks))
        .route("/decks/{name}", get(get_deck))
        .route("/decks/{name}/html", get(get_deck_html))
        .route("/kb", get(get_kb).put(put_kb))
        .route("/skills", get(get_skills))
        .route("/experiments", post(post_experiment))
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .with_state(state)
}

pub fn app(workspace: Workspace) -> Router {
    router(AppState::new(workspace))
}

async fn create_session(State(st): State<Arc<AppState>>) -> impl IntoResponse {
    let id = st.ws().create_session();
    (StatusCode::CREATED, Json(json!({"session_id": id})))
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ws = st.ws();
    let s = ws.session(&id).ok_or_else(|| ApiError::from(WorkspaceError::UnknownSession(id.clone())))?;
    Ok(Json(json!({
        "session_id": s.id,
        "transcript": s.transcript,
        "pending_clarification": s.state.pending,
        "parameters": s.state.deck_parameters,
        "deck_version": ws.deck_version(),
    })))
}

#[derive(Debug, Deserialize)]
pub struct MessageBody {
    pub text: String,
}

async fn post_message(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<MessageBody>,
) -> ApiResult<Json<ChatTurn>> {
    let (turn, before) = {
        let mut ws = st.ws();
        let before = ws.deck_version();
        (ws.handle_message(&id, &body.text)?, before)
    };
    // no receivers is fine
    let _ = st.events.send(ServerEvent::Turn { turn: Box::new(turn.clone()) });
    if turn.deck_version != before {
        if let Some(deck) = &turn.deck {
            let _ = st.events.send(ServerEvent::Deck { deck: deck.clone(), deck_version: turn.deck_version });
        }
    }
    Ok(Json(turn))
}

async fn session_events(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let (rx, version) = {
        let ws = st.ws();
        if ws.session(&id).is_none() {
            return Err(WorkspaceError::UnknownSession(id).into());
        }
        (st.subscribe(), ws.deck_version())
    };
    let hello = stream::once(async move { ServerEvent::Hello { deck_version: version } });
    let updates = BroadcastStream::new(rx).filter_map(move |e| {
        let keep = e.ok().filter(|e| e.visible_to(&id));
        async move { keep }
    });
    let events = hello.chain(updates).map(|e| {
        let data = serde_json::to_string(&e).expect("events serialize");
        Ok(Event::default().event(e.name()).data(data))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

async fn list_decks(State(st): State<Arc<AppState>>) -> Json<Value> {
    let ws = st.ws();
    let names: Vec<&str> = ws.deck_names().collect();
    Json(json!({"decks": names, "deck_version": ws.deck_version()}))
}

async fn get_deck(State(st): State<Arc<AppState>>, Path(name): Path<String>) -> ApiResult<Response> {
    let ws = st.ws();
    let deck = ws.deck(&name).ok_or_else(|| ApiError::from(WorkspaceError::UnknownDeck(name.clone())))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], deckforge::deck::serialize_deck(deck)).into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct HtmlQuery {
    pub theme: Option<String>,
    pub embed_data: Option<bool>,
}

async fn get_deck_html(
    State(st): State<Arc<AppState>>,
    Path(name): Path<String>,
    Query(q): Query<HtmlQuery>,
) -> ApiResult<Html<String>> {
    let theme = match q.theme.as_deref() {
        None | Some("light") => Theme::Light,
        Some("dark") => Theme::Dark,
        Some(other) => return Err(ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", format!("unknown theme '{other}'"))),
    };
    let opts = RenderOptions { theme, embed_data: q.embed_data.unwrap_or(false), ..RenderOptions::default() };
    Ok(Html(st.ws().deck_html(&name, &opts)?))
}

async fn get_kb(State(st): State<Arc<AppState>>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], st.ws().kb().to_json()).into_response()
}

async fn put_kb(State(st): State<Arc<AppState>>, body: String) -> ApiResult<Json<Value>> {
    let mut ws = st.ws();
    ws.replace_kb(&body)?;
    Ok(Json(json!({"variant": ws.kb().variant().as_str()})))
}

async fn get_skills(State(st): State<Arc<AppState>>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], st.ws().library().to_json()).into_response()
}

/// Fields left out of the request body take their defaults.
pub fn experiment_config(body: &Value) -> Result<ExperimentConfig, ApiError> {
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "CONFIG_ERROR", m);
    let mut cfg: Value = serde_json::from_str(&ExperimentConfig::default().to_json()).expect("default config is JSON");
    match body {
        Value::Object(fields) => {
            for (k, v) in fields {
                if cfg.get(k).is_none() {
                    return Err(bad(format!("unknown field '{k}'")));
                }
                cfg[k] = v.clone();
            }
        }
        Value::Null => {}
        _ => return Err(bad("experiment config must be a JSON object".into())),
    }
    ExperimentConfig::from_json(&cfg.to_string()).map_err(|e| bad(e.to_string()))
}

async fn post_experiment(State(st): State<Arc<AppState>>, body: Option<Json<Value>>) -> ApiResult<Json<Value>> {
    let cfg = experiment_config(&body.map(|b| b.0).unwrap_or(Value::Null))?;
    let out_root = st.ws().root().map(|r| r.join("experiments"));
    let result = tokio::task::spawn_blocking(move || run_experiment(&cfg))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "CONFIG_ERROR", e.to_string()))?;
    let mut output_dir = None;
    if let Some(root) = out_root {
        let n = std::fs::read_dir(&root).map(|d| d.count()).unwrap_or(0);
        let dir = root.join(format!("run-{}", n + 1));
        result
            .write_outputs(&dir)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "IO_ERROR", e.to_string()))?;
        output_dir = Some(dir.display().to_string());
    }
    let cells: Vec<Value> = result
        .cells
        .iter()
        .map(|c| {
            json!({"alpha": c.alpha, "N": c.vocab_size, "pdf": c.pdf.as_str(),
                   "mean_diff": c.mean_diff, "stddev": c.stddev, "p_value": c.p_value})
        })
        .collect();
    Ok(Json(json!({"config": result.config, "cells": cells, "grid_csv": result.grid_csv(), "output_dir": output_dir})))
}
