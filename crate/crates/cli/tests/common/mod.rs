#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use chrono::{Duration, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::Value;
use talechat_cli::server::{router, AppState};
use talechat_core::clock::ManualClock;
use talechat_core::config::Config;
use talechat_core::dialogue::{DisabledGenerator, Engine};
use tower::ServiceExt;

pub const TOKEN: &str = "fixture-supervisor-token";

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name();
        if name == "data" {
            continue;
        }
        let target = to.join(&name);
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// A private copy of the fixture tree; corpus and data writes stay inside it.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        copy_tree(&fixtures_dir(), dir.path());
        Self { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config_path(&self) -> PathBuf {
        self.path().join("config.toml")
    }

    pub fn config(&self) -> Config {
        Config::load(&self.config_path()).unwrap()
    }

    /// An engine over this workspace with a deterministic clock.
    pub fn engine(&self) -> Arc<Engine> {
        let start = Utc.with_ymd_and_hms(2023, 5, 25, 14, 41, 0).unwrap();
        let clock = Arc::new(ManualClock::new(start, Duration::seconds(1)));
        Arc::new(Engine::from_config(&self.config(), clock, Arc::new(DisabledGenerator)).unwrap())
    }

    pub fn app(&self) -> Api {
        let engine = self.engine();
        Api {
            router: router(AppState::new(engine.clone(), Some(TOKEN.to_string()))),
            engine,
        }
    }
}

pub struct Api {
    pub router: Router,
    pub engine: Arc<Engine>,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }
}

impl Api {
    pub async fn send(&self, method: Method, uri: &str, body: Option<Value>, headers: &[(&str, &str)]) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let response = self.router.clone().oneshot(req).await.unwrap();
        let status = response.status();
        let headers = response.headers().clone();
        let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, headers, bytes }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, None, &[]).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::POST, uri, Some(body), &[]).await
    }

    pub async fn supervisor(&self, method: Method, uri: &str, body: Option<Value>) -> Reply {
        let auth = format!("Bearer {TOKEN}");
        self.send(method, uri, body, &[("authorization", auth.as_str())]).await
    }

    pub async fn register(&self, age: u32, gender: &str, visible: bool) -> String {
        let r = self
            .post("/register", serde_json::json!({ "age": age, "gender": gender, "visible_to_supervisor": visible }))
            .await;
        assert_eq!(r.status, StatusCode::CREATED);
        r.json()["user_id"].as_str().unwrap().to_string()
    }

    pub async fn open(&self, user: Option<&str>) -> (String, Value) {
        let r = self.post("/session", serde_json::json!({ "user_id": user })).await;
        assert_eq!(r.status, StatusCode::CREATED);
        let id = r.headers["x-session-id"].to_str().unwrap().to_string();
        let body = r.json();
        assert_eq!(body["session"], id.as_str());
        (id, body)
    }

    pub async fn say(&self, session: &str, text: &str) -> Value {
        let r = self
            .post(&format!("/session/{session}/message"), serde_json::json!({ "text": text }))
            .await;
        assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.bytes));
        r.json()
    }

    pub async fn command(&self, session: &str, command: &str) -> Value {
        let r = self
            .post(&format!("/session/{session}/command"), serde_json::json!({ "command": command }))
            .await;
        assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.bytes));
        r.json()
    }
}

pub fn tale_ids(turn: &Value) -> Vec<String> {
    turn["replies"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r["tales"].as_array().cloned().unwrap_or_default())
        .map(|t| t["id"].as_str().unwrap().to_string())
        .collect()
}
