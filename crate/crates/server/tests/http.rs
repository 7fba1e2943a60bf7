use std::time::Duration;

use futures_util::StreamExt;
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

use deckforge::kb::Variant;
use deckforge::skills::MemoryData;
use deckforge::workspace::{default_parser_model, demo_datasets, Workspace};

async fn spawn(ws: Workspace) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, deckforge_server::app(ws)).await.unwrap() });
    format!("http://{addr}")
}

fn memory_workspace() -> Workspace {
    let data: MemoryData = demo_datasets().into_iter().collect();
    Workspace::in_memory(data, default_parser_model(), Variant::Rkb)
}

async fn say(c: &Client, base: &str, session: &str, text: &str) -> Value {
    let r = c.post(format!("{base}/sessions/{session}/messages")).json(&json!({"text": text})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    r.json().await.unwrap()
}

async fn new_session(c: &Client, base: &str) -> String {
    let r = c.post(format!("{base}/sessions")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    r.json::<Value>().await.unwrap()["session_id"].as_str().unwrap().to_string()
}

/// Reads SSE frames until one with the given event name arrives.
async fn next_event<S>(stream: &mut S, buf: &mut String, name: &str) -> Value
where
    S: futures_util::Stream<Item = reqwest::Result<bytes::Bytes>> + Unpin,
{
    loop {
        while let Some(i) = buf.find("\n\n") {
            let frame: String = buf.drain(..i + 2).collect();
            let event = frame.lines().find_map(|l| l.strip_prefix("event: ")).unwrap_or("");
            let data = frame.lines().find_map(|l| l.strip_prefix("data: "));
            if event == name {
                return serde_json::from_str(data.unwrap()).unwrap();
            }
        }
        let chunk = tokio::time::timeout(Duration::from_secs(5), stream.next()).await.expect("event in time").unwrap().unwrap();
        buf.push_str(std::str::from_utf8(&chunk).unwrap());
    }
}

#[tokio::test]
async fn briefing_flow_over_http() {
    let base = spawn(memory_workspace()).await;
    let c = Client::new();
    let s = new_session(&c, &base).await;

    let events = c.get(format!("{base}/sessions/{s}/events")).send().await.unwrap();
    assert_eq!(events.status(), StatusCode::OK);
    let mut stream = events.bytes_stream();
    let mut buf = String::new();
    assert_eq!(next_event(&mut stream, &mut buf, "hello").await["deck_version"], 0);

    let t = say(&c, &base, &s, "create a briefing deck about Tesla Motor").await;
    let candidates = t["clarification"]["candidates"].as_array().unwrap();
    assert!(candidates.iter().any(|v| v == "TSLA"));
    assert_eq!(next_event(&mut stream, &mut buf, "turn").await["turn"]["user_text"], "create a briefing deck about Tesla Motor");

    say(&c, &base, &s, "TSLA").await;
    let t = say(&c, &base, &s, "Run the analysis").await;
    assert!(t["error_code"].is_null(), "{t}");
    let deck_name = t["deck"].as_str().unwrap().to_string();
    let ev = next_event(&mut stream, &mut buf, "deck").await;
    assert_eq!(ev["deck"], deck_name.as_str());
    assert_eq!(ev["deck_version"], 1);

    let deck: Value = c.get(format!("{base}/decks/{deck_name}")).send().await.unwrap().json().await.unwrap();
    assert_eq!(deck["slides"].as_array().unwrap().len(), 10);

    say(&c, &base, &s, "change time horizon from 3 months to 6 months").await;
    say(&c, &base, &s, "use the Median instead of the Mean").await;
    let t = say(&c, &base, &s, "Run the analysis").await;
    assert_eq!(t["deck_version"], 2);
    assert_eq!(next_event(&mut stream, &mut buf, "deck").await["deck_version"], 2);

    let deck: Value = c.get(format!("{base}/decks/{deck_name}")).send().await.unwrap().json().await.unwrap();
    assert_eq!(deck["parameters"]["horizon_months"], 6);
    assert_eq!(deck["parameters"]["aggregation_metric"], "median");

    let r = c.get(format!("{base}/decks/{deck_name}/html?theme=dark")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("text/html"));
    assert_eq!(r.text().await.unwrap().matches("<section class=\"slide\"").count(), 10);

    let session: Value = c.get(format!("{base}/sessions/{s}")).send().await.unwrap().json().await.unwrap();
    assert_eq!(session["transcript"].as_array().unwrap().len(), 6);
    assert!(session["pending_clarification"].is_null());
}

#[tokio::test]
async fn errors_are_json_with_status() {
    let base = spawn(memory_workspace()).await;
    let c = Client::new();
    let r = c.get(format!("{base}/decks/nope")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    assert_eq!(r.json::<Value>().await.unwrap()["error"]["code"], "UNKNOWN_DECK");

    let r = c.post(format!("{base}/sessions/ghost/messages")).json(&json!({"text": "hi"})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    assert_eq!(r.json::<Value>().await.unwrap()["error"]["code"], "UNKNOWN_SESSION");

    let s = new_session(&c, &base).await;
    let t = say(&c, &base, &s, "").await;
    assert_eq!(t["error_code"], "EMPTY_COMMAND");

    let r = c.get(format!("{base}/sessions/{s}/events")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let r = c.get(format!("{base}/sessions/ghost/events")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn kb_and_skills_endpoints() {
    let base = spawn(memory_workspace()).await;
    let c = Client::new();
    let kb: Value = c.get(format!("{base}/kb")).send().await.unwrap().json().await.unwrap();
    assert_eq!(kb["variant"], "rkb");
    assert_eq!(kb["version"], 1);

    let mut nkb: Value = serde_json::from_str(&deckforge::kb::KnowledgeBase::seeded(Variant::Nkb).to_json()).unwrap();
    nkb["entries"].as_array_mut().unwrap().push(json!({"mc": "object", "word": "pizzachart", "dist": {"piechart": 1.0}, "l": 1}));
    let r = c.put(format!("{base}/kb")).body(nkb.to_string()).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK, "{}", r.text().await.unwrap());
    let kb: Value = c.get(format!("{base}/kb")).send().await.unwrap().json().await.unwrap();
    assert_eq!(kb["variant"], "nkb");
    assert!(kb["entries"].as_array().unwrap().iter().any(|e| e["word"] == "pizzachart"));

    let r = c.put(format!("{base}/kb")).body("{\"version\": 9}").send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let skills: Value = c.get(format!("{base}/skills")).send().await.unwrap().json().await.unwrap();
    assert!(skills["macros"].as_array().unwrap().iter().any(|m| m["name"] == "company_briefing_deck"));
}

#[tokio::test]
async fn experiments_endpoint_runs_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("model.json"), default_parser_model().to_json()).unwrap();
    let ws = Workspace::open(dir.path(), Variant::Rkb).unwrap();
    let base = spawn(ws).await;
    let c = Client::new();
    let body = json!({"alphas": [0.6], "vocab_sizes": [5], "pdfs": ["inv_n"], "repetitions": 2, "slides": 100});
    let r = c.post(format!("{base}/experiments")).json(&body).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 1);
    assert_eq!(v["cells"][0]["N"], 5);
    let out = std::path::PathBuf::from(v["output_dir"].as_str().unwrap());
    assert!(out.join("curves.csv").exists() && out.join("grid.csv").exists());

    let r = c.post(format!("{base}/experiments")).json(&json!({"alphas": [0.1]})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let r = c.post(format!("{base}/experiments")).json(&json!({"bogus": 1})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
}

#[test]
fn schema_document_lists_every_route() {
    let doc: Value = serde_json::from_str(include_str!("../../../docs/openapi.json")).unwrap();
    let src = include_str!("../src/lib.rs");
    let routes: Vec<&str> = src.lines().filter_map(|l| l.trim().strip_prefix(".route(\"")).map(|l| &l[..l.find('"').unwrap()]).collect();
    assert!(routes.len() >= 10);
    for r in routes {
        assert!(doc["paths"].get(r).is_some(), "{r} missing from docs/openapi.json");
    }
}
