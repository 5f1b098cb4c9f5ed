#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use simpeval_annosvc::{router, Config, ManualClock, Service};
use tower::ServiceExt;

pub const ADMIN: &str = "admin-secret";
pub const T0: u64 = 1_700_000_000;

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/service.toml")
}

pub fn config_with_store(store: &Path) -> Config {
    let mut cfg = Config::load(&fixture_path()).unwrap();
    cfg.store = store.to_path_buf();
    cfg
}

pub struct App {
    pub router: Router,
    pub clock: Arc<ManualClock>,
    pub service: Arc<Service>,
}

impl App {
    pub fn in_memory() -> Self {
        let cfg = Config::load(&fixture_path()).unwrap();
        let clock = Arc::new(ManualClock::new(T0));
        Self::wrap(Service::in_memory(cfg, Box::new(clock.clone())), clock)
    }

    pub fn on_disk(store: &Path) -> Self {
        let clock = Arc::new(ManualClock::new(T0));
        Self::wrap(Service::open(config_with_store(store), Box::new(clock.clone())).unwrap(), clock)
    }

    fn wrap(service: Service, clock: Arc<ManualClock>) -> Self {
        let service = Arc::new(service);
        App { router: router(service.clone()), clock, service }
    }

    pub async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let body = match body {
            Some(v) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    pub async fn json(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let (s, text) = self.call(method, uri, token, body).await;
        (s, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    pub async fn session(&self, annotator: &str, task: &str) -> String {
        let (s, v) = self
            .json(
                Method::POST,
                "/sessions",
                None,
                Some(json!({"annotator_id": annotator, "task": task, "credential": format!("cred-{annotator}")})),
            )
            .await;
        assert_eq!(s, StatusCode::OK, "{v}");
        v["token"].as_str().unwrap().to_string()
    }

    pub async fn qual_session(&self, annotator: &str, target: &str) -> String {
        let body = json!({
            "annotator_id": annotator, "task": "qualification", "target": target,
            "credential": format!("cred-{annotator}")
        });
        let (s, v) = self.json(Method::POST, "/sessions", None, Some(body)).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        v["token"].as_str().unwrap().to_string()
    }

    pub async fn submit(&self, token: &str, id: &str, system: &str, payload: Value, key: &str) -> (StatusCode, Value) {
        let body = json!({
            "unit": {"id": id, "system": system},
            "payload": payload,
            "client_version": "test/1",
            "idempotency_key": key,
        });
        self.json(Method::POST, "/submit", Some(token), Some(body)).await
    }

    pub async fn export(&self, task: &str, history: bool) -> String {
        let (s, text) =
            self.call(Method::GET, &format!("/export?task={task}&history={history}"), Some(ADMIN), None).await;
        assert_eq!(s, StatusCode::OK, "{text}");
        text
    }
}

/// Two overlapping spans on the first task-1 unit's output.
pub fn overlapping_task1() -> Value {
    json!({"annotations": [
        {"type": "altered_meaning_lexical", "output_spans": [[22, 30]]},
        {"type": "altered_meaning_structural", "output_spans": [[0, 30]], "source_spans": [[0, 41]]}
    ]})
}
