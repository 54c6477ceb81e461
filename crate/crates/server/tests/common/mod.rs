//! In-process HTTP harness: the real router over a temp-dir store and a
//! manual clock, driven with `tower::ServiceExt::oneshot`.
#![allow(dead_code)]

pub mod authz;
pub mod delivery;
pub mod rendering;
pub mod scenario;

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use chrono::Duration;
use http_body_util::BodyExt;
use recuerdame_core::clock::ManualClock;
use recuerdame_core::domain::TherapistAccount;
use recuerdame_core::service::Clinic;
use recuerdame_core::store::Store;
use recuerdame_server::auth::{self, TokenKey};
use recuerdame_server::{routes, AppState};
use recuerdame_testkit::fixture::epoch;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

pub const SECRET: &[u8] = b"test-secret-test-secret-test-secret!";
pub const BODY_LIMIT: usize = 4 * 1024 * 1024;

pub struct Harness {
    pub app: Router,
    pub state: AppState,
    pub clock: ManualClock,
    pub dir: TempDir,
}

#[derive(Debug)]
pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!(
                "{} is not JSON ({e}): {}",
                self.status,
                String::from_utf8_lossy(&self.body)
            )
        })
    }

    /// The ETag as a bare version number.
    pub fn version(&self) -> u64 {
        self.headers[header::ETAG]
            .to_str()
            .unwrap()
            .trim_matches('"')
            .parse()
            .unwrap()
    }

    pub fn header(&self, name: &str) -> &str {
        self.headers.get(name).map(|v| v.to_str().unwrap()).unwrap_or("")
    }

    #[track_caller]
    pub fn expect(self, status: StatusCode) -> Self {
        assert_eq!(self.status, status, "body: {}", String::from_utf8_lossy(&self.body));
        self
    }

    pub fn code(&self) -> String {
        self.json()["code"].as_str().unwrap_or_default().to_string()
    }
}

impl Harness {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(&dir.path().join("data"), &dir.path().join("media")).unwrap();
        let clock = ManualClock::new(epoch());
        let clinic = Clinic::new(Arc::new(store), Arc::new(clock.clone()));
        let state = AppState::new(clinic, TokenKey::new(SECRET));
        let app = routes::router(state.clone(), BODY_LIMIT);
        Self { app, state, clock, dir }
    }

    pub fn clinic(&self) -> &Clinic {
        &self.state.clinic
    }

    /// Registers a therapist and returns a token valid for thirty days.
    pub fn therapist(&self, name: &str, email: &str) -> (TherapistAccount, String) {
        let (t, _) = self.clinic().register_therapist(name, email).unwrap();
        let token = auth::provision(
            self.clinic(),
            &self.state.key,
            t.id,
            self.clinic().now() + Duration::days(30),
        )
        .unwrap();
        (t, token)
    }

    pub async fn send(&self, req: Request<Body>) -> Reply {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp.into_body().collect().await.unwrap().to_bytes();
        Reply { status, headers, body }
    }

    pub async fn call(
        &self,
        method: Method,
        uri: &str,
        token: Option<&str>,
        if_match: Option<u64>,
        body: Option<&Value>,
    ) -> Reply {
        let mut b = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            b = b.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        if let Some(v) = if_match {
            b = b.header(header::IF_MATCH, format!("\"{v}\""));
        }
        let req = match body {
            Some(v) => b
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(serde_json::to_vec(v).unwrap()))
                .unwrap(),
            None => b.body(Body::empty()).unwrap(),
        };
        self.send(req).await
    }

    pub async fn get(&self, uri: &str, token: &str) -> Reply {
        self.call(Method::GET, uri, Some(token), None, None).await
    }

    pub async fn post(&self, uri: &str, token: &str, body: Value) -> Reply {
        self.call(Method::POST, uri, Some(token), None, Some(&body)).await
    }

    pub async fn post_if(&self, uri: &str, token: &str, version: u64, body: Value) -> Reply {
        self.call(Method::POST, uri, Some(token), Some(version), Some(&body))
            .await
    }

    pub async fn patch(&self, uri: &str, token: &str, version: u64, body: Value) -> Reply {
        self.call(Method::PATCH, uri, Some(token), Some(version), Some(&body))
            .await
    }

    pub async fn delete(&self, uri: &str, token: &str, version: u64) -> Reply {
        self.call(Method::DELETE, uri, Some(token), Some(version), None).await
    }

    /// `multipart/form-data` upload of one file plus text fields.
    pub async fn upload(
        &self,
        uri: &str,
        token: &str,
        version: u64,
        content_type: &str,
        bytes: &[u8],
        fields: &[(&str, &str)],
    ) -> Reply {
        let boundary = "XyZzyBoundary7";
        let mut body = Vec::new();
        for (k, v) in fields {
            body.extend_from_slice(
                format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{k}\"\r\n\r\n{v}\r\n").as_bytes(),
            );
        }
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"upload\"\r\nContent-Type: {content_type}\r\n\r\n").as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
        let req = Request::builder()
            .method(Method::POST)
            .uri(uri)
            .header(header::AUTHORIZATION, format!("Bearer {token}"))
            .header(header::IF_MATCH, version.to_string())
            .header(
                header::CONTENT_TYPE,
                format!("multipart/form-data; boundary={boundary}"),
            )
            .body(Body::from(body))
            .unwrap();
        self.send(req).await
    }
}

pub fn id(v: &Value) -> String {
    v["id"].as_str().unwrap().to_string()
}

pub fn memory(description: &str, stage: &str, year: i64) -> Value {
    serde_json::json!({
        "description": description,
        "date": { "year": year },
        "life_stage": stage,
        "categories": ["family"],
        "preservation_status": "preserved",
        "emotion_valence": "positive",
        "mood_score": 6,
    })
}

/// Creates a patient as `token`'s therapist and returns its id.
pub async fn patient(h: &Harness, token: &str, name: &str) -> String {
    let r = h
        .post("/patients", token, serde_json::json!({ "display_name": name }))
        .await
        .expect(StatusCode::CREATED);
    id(&r.json())
}
