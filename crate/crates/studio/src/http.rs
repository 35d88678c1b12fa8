//! HTTP routes over [`Studio`]. Bodies are JSON; errors are
//! `{"error": code, "message": text}` plus `report` for validation failures.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use storybot_core::narrative::MilestoneKind;
use storybot_core::program::decode;
use tower_http::cors::{Any, CorsLayer};

use crate::service::{ApiError, Studio};
use crate::session::{Phase, RunMode};

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) | ApiError::IndexError { .. } => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::EmptyStory | ApiError::ValidationFailed(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::NotConnected | ApiError::PhaseOrder { .. } | ApiError::Conflict => StatusCode::CONFLICT,
            ApiError::Gateway(_) | ApiError::Schema(_) => StatusCode::BAD_GATEWAY,
            ApiError::Storage(_) | ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "not_found",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::EmptyStory => "empty_story",
            ApiError::ValidationFailed(_) => "validation_failed",
            ApiError::NotConnected => "not_connected",
            ApiError::IndexError { .. } => "index_out_of_range",
            ApiError::PhaseOrder { .. } => "phase_order",
            ApiError::Conflict => "conflict",
            ApiError::Gateway(_) => "llm_unavailable",
            ApiError::Schema(_) => "llm_schema_failed",
            ApiError::Storage(_) => "storage",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        if let ApiError::ValidationFailed(report) = &self {
            body["report"] = serde_json::to_value(report).expect("report serializes");
        }
        (self.status(), Json(body)).into_response()
    }
}

type Shared = State<Arc<Studio>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(format!("malformed request body: {e}")))
}

fn milestone(text: &str) -> Result<MilestoneKind, ApiError> {
    text.parse::<MilestoneKind>()
        .map_err(|e| ApiError::BadRequest(e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatRequest {
    message: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MilestoneRequest {
    #[serde(default = "yes")]
    complete: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoryRequest {
    text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseRequest {
    phase: Phase,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunRequest {
    mode: RunMode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConnectRequest {
    ip: String,
}

#[derive(Debug, Serialize)]
struct Capabilities<'a> {
    manifest: &'a storybot_core::catalog::CapabilityManifest,
    text: &'a str,
}

/// Which browser origins may call the API.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Cors {
    #[default]
    Off,
    Any,
    Origin(String),
}

pub fn router(studio: Arc<Studio>, cors: &Cors) -> Router {
    let app = Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/catalog", get(catalog))
        .route("/capabilities", get(capabilities))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/chat", post(chat))
        .route("/sessions/{id}/help/{milestone}", post(help))
        .route("/sessions/{id}/milestones/{kind}", post(set_milestone))
        .route("/sessions/{id}/summarize", post(summarize))
        .route("/sessions/{id}/story", put(edit_story))
        .route("/sessions/{id}/phase", post(set_phase))
        .route("/sessions/{id}/goals", post(generate_goals).get(goals))
        .route("/sessions/{id}/goals/retry", post(retry_goals))
        .route("/sessions/{id}/goals/{g}/hints/{h}/open", post(open_hint))
        .route("/sessions/{id}/program", put(put_program))
        .route("/sessions/{id}/validate", post(validate))
        .route("/sessions/{id}/run", post(run))
        .route("/sessions/{id}/connect", post(connect))
        .route("/sessions/{id}/activity", get(activity))
        .with_state(studio);
    let layer = match cors {
        Cors::Off => return app,
        Cors::Any => CorsLayer::new().allow_origin(Any),
        Cors::Origin(o) => match HeaderValue::from_str(o) {
            Ok(v) => CorsLayer::new().allow_origin(v),
            Err(_) => return app,
        },
    };
    app.layer(layer.allow_methods(Any).allow_headers(Any))
}

async fn catalog(State(s): Shared) -> Json<Value> {
    Json(serde_json::to_value(&s.grounding().catalog).expect("catalog serializes"))
}

async fn capabilities(State(s): Shared) -> Json<Value> {
    let g = s.grounding();
    Json(
        serde_json::to_value(Capabilities {
            manifest: &g.manifest,
            text: &g.capability_text,
        })
        .expect("manifest serializes"),
    )
}

async fn create_session(State(s): Shared) -> Result<(StatusCode, Json<Value>), ApiError> {
    let session = s.create_session().await?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(session).expect("session serializes"))))
}

async fn list_sessions(State(s): Shared) -> Json<Value> {
    Json(serde_json::to_value(s.list_sessions().await).expect("summaries serialize"))
}

async fn get_session(State(s): Shared, Path(id): Path<String>) -> ApiResult<crate::Session> {
    Ok(Json(s.session(&id).await?))
}

async fn chat(State(s): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<crate::service::ChatResult> {
    let req: ChatRequest = parse(&body)?;
    Ok(Json(s.chat(&id, &req.message).await?))
}

async fn help(
    State(s): Shared,
    Path((id, kind)): Path<(String, String)>,
) -> ApiResult<storybot_core::narrative::HelpSuggestions> {
    Ok(Json(s.request_help(&id, milestone(&kind)?).await?))
}

async fn set_milestone(
    State(s): Shared,
    Path((id, kind)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<crate::Session> {
    let kind = milestone(&kind)?;
    let req: MilestoneRequest = if body.is_empty() {
        MilestoneRequest { complete: true }
    } else {
        parse(&body)?
    };
    Ok(Json(s.set_milestone(&id, kind, req.complete).await?))
}

async fn summarize(State(s): Shared, Path(id): Path<String>) -> ApiResult<crate::Session> {
    Ok(Json(s.summarize(&id).await?))
}

async fn edit_story(State(s): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<crate::Session> {
    let req: StoryRequest = parse(&body)?;
    Ok(Json(s.edit_story(&id, &req.text).await?))
}

async fn set_phase(State(s): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<crate::Session> {
    let req: PhaseRequest = parse(&body)?;
    Ok(Json(s.set_phase(&id, req.phase).await?))
}

async fn generate_goals(State(s): Shared, Path(id): Path<String>) -> ApiResult<storybot_core::goals::GoalSet> {
    Ok(Json(s.generate_goals(&id).await?))
}

async fn retry_goals(State(s): Shared, Path(id): Path<String>) -> ApiResult<storybot_core::goals::GoalSet> {
    Ok(Json(s.retry_goals(&id).await?))
}

async fn goals(State(s): Shared, Path(id): Path<String>) -> ApiResult<crate::service::GoalsView> {
    Ok(Json(s.goals(&id).await?))
}

async fn open_hint(
    State(s): Shared,
    Path((id, g, h)): Path<(String, String, String)>,
) -> ApiResult<storybot_core::goals::Hint> {
    let index = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| ApiError::BadRequest(format!("`{t}` is not an index")))
    };
    Ok(Json(s.open_hint(&id, index(&g)?, index(&h)?).await?))
}

async fn put_program(
    State(s): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<storybot_core::program::ValidationReport> {
    let program = decode(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(s.put_program(&id, program).await?))
}

async fn validate(State(s): Shared, Path(id): Path<String>) -> ApiResult<storybot_core::program::ValidationReport> {
    Ok(Json(s.validate(&id).await?))
}

async fn run(State(s): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<crate::service::RunResult> {
    let req: RunRequest = parse(&body)?;
    Ok(Json(s.run(&id, req.mode).await?))
}

async fn connect(State(s): Shared, Path(id): Path<String>, body: Bytes) -> ApiResult<storybot_link::RobotConnection> {
    let req: ConnectRequest = parse(&body)?;
    Ok(Json(s.connect(&id, &req.ip).await?))
}

async fn activity(State(s): Shared, Path(id): Path<String>) -> ApiResult<Vec<crate::ActivityEvent>> {
    Ok(Json(s.activity(&id).await?))
}
