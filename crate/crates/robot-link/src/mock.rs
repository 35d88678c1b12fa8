//! A stand-in robot that speaks the wire protocol and records every call.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::protocol::{success_body, COMMAND_TABLE, DEVICE_ENDPOINT};

pub const MOCK_NAME: &str = "mock-misty";
pub const MOCK_API_VERSION: &str = "1.0";

/// Status overrides keyed by command index (0-based, health checks excluded).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultScript(pub BTreeMap<usize, u16>);

#[derive(Debug, thiserror::Error)]
pub enum FaultScriptError {
    #[error("cannot read fault script {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("fault script must be a JSON object of call index to HTTP status: {0}")]
    Parse(String),
}

impl FaultScript {
    pub fn from_json(text: &str) -> Result<Self, FaultScriptError> {
        let script: FaultScript = serde_json::from_str(text).map_err(|e| FaultScriptError::Parse(e.to_string()))?;
        if let Some(bad) = script.0.values().find(|s| !(100..=599).contains(*s)) {
            return Err(FaultScriptError::Parse(format!("{bad} is not an HTTP status")));
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, FaultScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| FaultScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedCall {
    pub endpoint: String,
    pub method: String,
    pub payload: Value,
    pub status: u16,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot bind mock robot to {addr}: {source}")]
pub struct BindError {
    pub addr: SocketAddr,
    pub source: std::io::Error,
}

#[derive(Debug, Default)]
struct Recorder {
    calls: Vec<RecordedCall>,
    commands_seen: usize,
    faults: FaultScript,
}

type Shared = Arc<Mutex<Recorder>>;

/// A running mock robot. Stops when dropped or on [`MockRobot::shutdown`].
#[derive(Debug)]
pub struct MockRobot {
    addr: SocketAddr,
    recorder: Shared,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl MockRobot {
    /// Serve on 127.0.0.1; port 0 picks a free one.
    pub async fn serve(port: u16) -> Result<Self, BindError> {
        Self::serve_at(SocketAddr::from(([127, 0, 0, 1], port)), FaultScript::default()).await
    }

    pub async fn serve_at(addr: SocketAddr, faults: FaultScript) -> Result<Self, BindError> {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|source| BindError { addr, source })?;
        let addr = listener.local_addr().map_err(|source| BindError { addr, source })?;
        let recorder: Shared = Arc::new(Mutex::new(Recorder {
            faults,
            ..Recorder::default()
        }));
        let app = router(recorder.clone());
        let (stop, stopped) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stopped.await;
                })
                .await;
        });
        Ok(Self {
            addr,
            recorder,
            stop: Some(stop),
            task: Some(task),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// The `ip:port` text a user would type to connect.
    pub fn ip(&self) -> String {
        self.addr.to_string()
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.recorder.lock().unwrap().calls.clone()
    }

    /// Calls other than health checks.
    pub fn command_calls(&self) -> Vec<RecordedCall> {
        self.calls().into_iter().filter(|c| c.endpoint != DEVICE_ENDPOINT).collect()
    }

    /// Forget recorded calls and restart fault indexing. The script stays.
    pub fn reset(&self) {
        let mut r = self.recorder.lock().unwrap();
        r.calls.clear();
        r.commands_seen = 0;
    }

    pub fn set_faults(&self, faults: FaultScript) {
        self.recorder.lock().unwrap().faults = faults;
    }

    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }

    /// Run until the server stops on its own.
    pub async fn wait(mut self) {
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for MockRobot {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}

fn router(recorder: Shared) -> Router {
    Router::new()
        .route(DEVICE_ENDPOINT, get(device))
        .route("/__mock/calls", get(list_calls))
        .route("/__mock/reset", post(reset))
        .fallback(command)
        .with_state(recorder)
}

async fn device(State(rec): State<Shared>) -> Json<Value> {
    rec.lock().unwrap().calls.push(RecordedCall {
        endpoint: DEVICE_ENDPOINT.to_owned(),
        method: "GET".to_owned(),
        payload: Value::Null,
        status: 200,
    });
    Json(json!({ "name": MOCK_NAME, "apiVersion": MOCK_API_VERSION }))
}

async fn list_calls(State(rec): State<Shared>) -> Json<Vec<RecordedCall>> {
    Json(rec.lock().unwrap().calls.clone())
}

async fn reset(State(rec): State<Shared>) -> StatusCode {
    let mut r = rec.lock().unwrap();
    r.calls.clear();
    r.commands_seen = 0;
    StatusCode::NO_CONTENT
}

async fn command(State(rec): State<Shared>, method: Method, uri: Uri, body: Bytes) -> Response {
    let path = uri.path().to_owned();
    let known = method == Method::POST && COMMAND_TABLE.iter().any(|(_, e)| *e == path);
    let parsed = serde_json::from_slice::<Value>(&body).ok().filter(Value::is_object);
    let mut r = rec.lock().unwrap();
    let status = if !known {
        StatusCode::NOT_FOUND
    } else {
        let index = r.commands_seen;
        r.commands_seen += 1;
        match (r.faults.0.get(&index), &parsed) {
            (Some(code), _) => StatusCode::from_u16(*code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            (None, None) => StatusCode::BAD_REQUEST,
            (None, Some(_)) => StatusCode::OK,
        }
    };
    r.calls.push(RecordedCall {
        endpoint: path,
        method: method.to_string(),
        payload: parsed.unwrap_or_else(|| Value::String(String::from_utf8_lossy(&body).into_owned())),
        status: status.as_u16(),
    });
    let body = if status.is_success() {
        success_body()
    } else {
        json!({ "status": "Failed", "code": status.as_u16() })
    };
    (status, Json(body)).into_response()
}
