#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tae_core::agents::Agents;
use tae_core::llm::{Gateway, MockProvider};
use tae_core::persist::ProjectStore;
use tae_server::{router, AppState};
use tempfile::TempDir;
use tower::ServiceExt;

pub struct TestApp {
    pub app: Router,
    pub state: AppState,
    pub mock: Arc<MockProvider>,
    pub dir: TempDir,
}

/// Rule-mode agents; chat planning scripted through `mock`.
pub fn app() -> TestApp {
    app_with_debounce(Duration::from_secs(3600))
}

pub fn app_with_debounce(d: Duration) -> TestApp {
    let dir = tempfile::tempdir().unwrap();
    let mock = Arc::new(MockProvider::default());
    let state = AppState::new(ProjectStore::open(dir.path()).unwrap(), Agents::rule(), Gateway::new(mock.clone()))
        .with_debounce(d);
    TestApp { app: router(state.clone()), state, mock, dir }
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, v)
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let b = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => b.header("content-type", "application/json").body(Body::from(v.to_string())).unwrap(),
        None => b.body(Body::empty()).unwrap(),
    };
    send(app, req).await
}

/// Create a project with one text track; returns (project id, track id).
pub async fn project_with_track(app: &Router) -> (String, String) {
    let (s, p) = call(app, "POST", "/projects", Some(json!({"name": "t", "seed": 11}))).await;
    assert_eq!(s, StatusCode::CREATED, "{p}");
    let pid = p["project"]["id"].as_str().unwrap().to_string();
    let (s, t) = call(app, "POST", &format!("/projects/{pid}/tracks"), Some(json!({"kind": "text", "name": "T"}))).await;
    assert_eq!(s, StatusCode::CREATED, "{t}");
    (pid, t["id"].as_str().unwrap().to_string())
}

pub async fn add_text(app: &Router, pid: &str, track: &str, start: f64, dur: f64, text: &str) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/projects/{pid}/clips"),
        Some(json!({"track_id": track, "start": start, "duration": dur, "payload": {"type": "text", "content": text}})),
    )
    .await
}

pub fn multipart(parts: &[(&str, Option<&str>, Option<&str>, &[u8])]) -> (String, Vec<u8>) {
    let boundary = "tae-test-boundary";
    let mut body = Vec::new();
    for (name, filename, ctype, data) in parts {
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        let mut disp = format!("Content-Disposition: form-data; name=\"{name}\"");
        if let Some(f) = filename {
            disp.push_str(&format!("; filename=\"{f}\""));
        }
        body.extend_from_slice(disp.as_bytes());
        body.extend_from_slice(b"\r\n");
        if let Some(c) = ctype {
            body.extend_from_slice(format!("Content-Type: {c}\r\n").as_bytes());
        }
        body.extend_from_slice(b"\r\n");
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}
