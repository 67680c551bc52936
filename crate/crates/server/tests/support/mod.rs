//! Fixture locations and the scripted scenarios shared by the integration
//! tests and the stub recorder.
#![allow(dead_code)]

use std::path::PathBuf;

use serde_json::Value;

pub const CHAT_MESSAGE: &str = "What should I focus on to reach the senior level?";
pub const KUBERNETES_QUESTION: &str = "probe-kubernetes";
pub const KUBERNETES_ANSWER: &str =
    "For the last two years I have run our production Kubernetes clusters myself, including upgrades and autoscaling.";
pub const FALLBACK_ANSWER: &str =
    "I am a Software Engineer II building backend services and APIs and reviewing code for my team.";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(path: &str) -> PathBuf {
    fixtures().join(path)
}

pub fn read_fixture(path: &str) -> Vec<u8> {
    std::fs::read(fixture(path)).unwrap_or_else(|e| panic!("reading fixture {path}: {e}"))
}

pub fn json_fixture(path: &str) -> Value {
    serde_json::from_slice(&read_fixture(path))
        .unwrap_or_else(|e| panic!("parsing fixture {path}: {e}"))
}

/// Drops every `*_at` / `at` member so responses compare across runs.
pub fn strip_timestamps(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.retain(|k, _| k != "at" && !k.ends_with("_at"));
            map.values_mut().for_each(strip_timestamps);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timestamps),
        _ => {}
    }
}

/// A router over a fresh file-backed store, driven in-process.
pub mod http {
    use std::sync::Arc;

    use axum::body::Body;
    use axum::http::{header, Method, Request, StatusCode};
    use axum::Router;
    use http_body_util::BodyExt;
    use serde_json::Value;
    use tower::ServiceExt;

    use coach_core::pipeline::CoachService;
    use coach_core::time::{SteppingClock, Timestamp};
    use coach_server::AppConfig;

    pub const START_MILLIS: i64 = 1_735_689_600_000;
    const BOUNDARY: &str = "coach-test-boundary";

    pub struct TestApp {
        pub router: Router,
        pub service: Arc<CoachService>,
        pub store_dir: tempfile::TempDir,
    }

    pub fn app() -> TestApp {
        let config = AppConfig::load(&super::fixture("coach.toml")).expect("fixture config");
        let store_dir = tempfile::tempdir().expect("tempdir");
        let clock = Arc::new(SteppingClock::starting_at(Timestamp::from_millis(
            START_MILLIS,
        )));
        let service = Arc::new(config.service(store_dir.path(), clock).expect("service"));
        TestApp {
            router: coach_server::router(service.clone()),
            service,
            store_dir,
        }
    }

    pub fn multipart(field: &str, filename: &str, bytes: &[u8]) -> Vec<u8> {
        let mut body = format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{field}\"; filename=\"{filename}\"\r\n\
             Content-Type: application/octet-stream\r\n\r\n"
        )
        .into_bytes();
        body.extend_from_slice(bytes);
        body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
        body
    }

    impl TestApp {
        pub async fn raw(&self, request: Request<Body>) -> (StatusCode, Value) {
            let response = self
                .router
                .clone()
                .oneshot(request)
                .await
                .expect("infallible");
            let status = response.status();
            let bytes = response
                .into_body()
                .collect()
                .await
                .expect("body")
                .to_bytes();
            let value = if bytes.is_empty() {
                Value::Null
            } else {
                serde_json::from_slice(&bytes).unwrap_or_else(|_| {
                    panic!("non-JSON response: {}", String::from_utf8_lossy(&bytes))
                })
            };
            (status, value)
        }

        pub async fn call(
            &self,
            method: Method,
            uri: &str,
            body: Option<Value>,
        ) -> (StatusCode, Value) {
            let builder = Request::builder().method(method).uri(uri);
            let request = match body {
                Some(body) => builder
                    .header(header::CONTENT_TYPE, "application/json")
                    .body(Body::from(body.to_string())),
                None => builder.body(Body::empty()),
            };
            self.raw(request.expect("request")).await
        }

        pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
            self.call(Method::GET, uri, None).await
        }

        pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
            self.call(Method::POST, uri, Some(body)).await
        }

        pub async fn put(&self, uri: &str, body: Value) -> (StatusCode, Value) {
            self.call(Method::PUT, uri, Some(body)).await
        }

        pub async fn create(&self, name: &str) -> String {
            let (status, body) = self
                .post("/v1/profiles", serde_json::json!({ "display_name": name }))
                .await;
            assert_eq!(status, StatusCode::CREATED, "{body}");
            body["profile_id"].as_str().expect("profile_id").to_string()
        }

        pub async fn upload_bytes(
            &self,
            id: &str,
            filename: &str,
            bytes: &[u8],
        ) -> (StatusCode, Value) {
            let request = Request::builder()
                .method(Method::POST)
                .uri(format!("/v1/profiles/{id}/resume"))
                .header(
                    header::CONTENT_TYPE,
                    format!("multipart/form-data; boundary={BOUNDARY}"),
                )
                .body(Body::from(multipart("file", filename, bytes)))
                .expect("request");
            self.raw(request).await
        }

        pub async fn upload(&self, id: &str, resume: &str) -> (StatusCode, Value) {
            let bytes = super::read_fixture(&format!("resume/{resume}"));
            self.upload_bytes(id, resume, &bytes).await
        }
    }
}
