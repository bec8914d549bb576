#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::json;
use tabinstruct::llm::EndpointConfig;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// What the scripted server does for the n-th request (0-based).
#[derive(Clone, Debug)]
pub enum Reply {
    Text(String),
    Status(u16),
    Hang(Duration),
    Delayed(Duration, String),
}

type Script = Arc<dyn Fn(usize, &str) -> Reply + Send + Sync>;

#[derive(Clone)]
struct ServerState {
    script: Script,
    hits: Arc<AtomicUsize>,
    in_flight: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
}

pub struct MockServer {
    pub base_url: String,
    pub hits: Arc<AtomicUsize>,
    pub peak: Arc<AtomicUsize>,
    task: tokio::task::JoinHandle<()>,
}

impl MockServer {
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn config(&self) -> EndpointConfig {
        EndpointConfig {
            base_url: self.base_url.parse().unwrap(),
            backoff_base: Duration::from_millis(2),
            timeout: Duration::from_secs(5),
            ..EndpointConfig::default()
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub fn chat_body(text: &str) -> serde_json::Value {
    json!({
        "id": "cmpl-1",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]
    })
}

async fn handle(State(s): State<ServerState>, Json(body): Json<serde_json::Value>) -> (StatusCode, Json<serde_json::Value>) {
    let n = s.hits.fetch_add(1, Ordering::SeqCst);
    let now = s.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    s.peak.fetch_max(now, Ordering::SeqCst);
    let prompt = body["messages"].as_array().and_then(|m| m.last()).and_then(|m| m["content"].as_str()).unwrap_or("").to_string();
    let reply = (s.script)(n, &prompt);
    let out = match reply {
        Reply::Text(t) => (StatusCode::OK, Json(chat_body(&t))),
        Reply::Status(code) => (StatusCode::from_u16(code).unwrap(), Json(json!({"error": {"message": "scripted"}}))),
        Reply::Hang(d) => {
            tokio::time::sleep(d).await;
            (StatusCode::OK, Json(chat_body("late")))
        }
        Reply::Delayed(d, t) => {
            tokio::time::sleep(d).await;
            (StatusCode::OK, Json(chat_body(&t)))
        }
    };
    s.in_flight.fetch_sub(1, Ordering::SeqCst);
    out
}

pub async fn spawn(script: impl Fn(usize, &str) -> Reply + Send + Sync + 'static) -> MockServer {
    let state = ServerState {
        script: Arc::new(script),
        hits: Arc::new(AtomicUsize::new(0)),
        in_flight: Arc::new(AtomicUsize::new(0)),
        peak: Arc::new(AtomicUsize::new(0)),
    };
    let app = Router::new().route("/v1/chat/completions", post(handle)).with_state(state.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let task = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    MockServer { base_url: format!("http://{addr}/v1"), hits: state.hits, peak: state.peak, task }
}
