//! HTTP front end for [`SessionStore`].
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{config, id?, simulated?}` | `201 {id, state}` |
//! | GET | `/sessions` | | `{ids}` |
//! | GET | `/sessions/{id}` | | status summary |
//! | POST | `/sessions/{id}/assignment` | `{override_stop?}` | assignment or stop |
//! | POST | `/sessions/{id}/outcome` | `{value}` | full state |
//! | POST | `/sessions/{id}/simulate` | `{stages}` | full state |
//! | GET | `/sessions/{id}/state` | | full state |
//! | GET | `/sessions/{id}/log` | | raw JSONL event log |
//!
//! Errors are `{"code": .., "message": .., "issues"?: [..]}`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use multiprior::config::{ExperimentConfig, FieldIssue};
use multiprior::engine::FinalDecision;
use multiprior::session::{PendingView, SessionError, SessionStatus, SessionStore};

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<FieldIssue>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "invalid_request",
            message: message.into(),
            issues: Vec::new(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::InvalidConfig(_) | SessionError::InvalidOutcome(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            SessionError::InvalidId(_) => StatusCode::BAD_REQUEST,
            SessionError::PendingAssignment
            | SessionError::NoPendingAssignment
            | SessionError::SessionStopped
            | SessionError::DuplicateId(_)
            | SessionError::NotSimulated => StatusCode::CONFLICT,
            SessionError::Replay(_) | SessionError::Io(_) | SessionError::Engine(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let issues = match &e {
            SessionError::InvalidConfig(c) => c.issues.clone(),
            _ => Vec::new(),
        };
        Self {
            status,
            code: e.code(),
            message: e.to_string(),
            issues,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type Store = Arc<SessionStore>;

pub fn router(store: Store) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(summary))
        .route("/sessions/{id}/assignment", post(assignment))
        .route("/sessions/{id}/outcome", post(outcome))
        .route("/sessions/{id}/simulate", post(simulate))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/log", get(log))
        .layer(CorsLayer::permissive())
        .with_state(store)
}

/// Parses a JSON body; an empty body reads as `{}`.
fn body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let text = if bytes.iter().all(u8::is_ascii_whitespace) {
        &b"{}"[..]
    } else {
        bytes
    };
    serde_json::from_slice(text).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

/// Store calls sync the log to disk, so they run off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, SessionError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
            message: e.to_string(),
            issues: Vec::new(),
        })?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct CreateRequest {
    config: serde_json::Value,
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    simulated: bool,
}

async fn create(State(store): State<Store>, bytes: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = body(&bytes)?;
    let config = ExperimentConfig::from_value(req.config).map_err(SessionError::from)?;
    let reply = blocking(move || {
        let id = store.create(config, req.id, req.simulated)?;
        let state = store.with(&id, |s| Ok(s.state()))?;
        Ok(serde_json::json!({ "id": id, "state": state }))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(reply)).into_response())
}

async fn list(State(store): State<Store>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "ids": store.ids() }))
}

#[derive(Serialize)]
struct Summary {
    id: String,
    status: SessionStatus,
    simulated: bool,
    t: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pending: Option<PendingView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decision: Option<FinalDecision>,
    aggregate: Vec<f64>,
    pulls: Vec<u64>,
}

async fn summary(State(store): State<Store>, Path(id): Path<String>) -> Result<Json<Summary>, ApiError> {
    let s = blocking(move || store.with(&id, |s| Ok(s.state()))).await?;
    Ok(Json(Summary {
        id: s.id,
        status: s.status,
        simulated: s.simulated,
        t: s.t,
        pending: s.pending,
        decision: s.decision,
        aggregate: s.beliefs.aggregate().to_vec(),
        pulls: s.pulls,
    }))
}

#[derive(Deserialize, Default)]
struct AssignmentRequest {
    #[serde(default)]
    override_stop: bool,
}

async fn assignment(
    State(store): State<Store>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<Response, ApiError> {
    let req: AssignmentRequest = body(&bytes)?;
    let reply = blocking(move || store.with(&id, |s| s.next_assignment(req.override_stop))).await?;
    Ok(Json(reply).into_response())
}

#[derive(Deserialize)]
struct OutcomeRequest {
    value: f64,
}

async fn outcome(
    State(store): State<Store>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<Response, ApiError> {
    let req: OutcomeRequest = body(&bytes)?;
    let state = blocking(move || store.with(&id, |s| s.report_outcome(req.value))).await?;
    Ok(Json(state).into_response())
}

#[derive(Deserialize)]
struct SimulateRequest {
    stages: u64,
}

async fn simulate(
    State(store): State<Store>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<Response, ApiError> {
    let req: SimulateRequest = body(&bytes)?;
    let state = blocking(move || store.with(&id, |s| s.simulate(req.stages))).await?;
    Ok(Json(state).into_response())
}

async fn state(State(store): State<Store>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let state = blocking(move || store.with(&id, |s| Ok(s.state()))).await?;
    Ok(Json(state).into_response())
}

async fn log(State(store): State<Store>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let lines = blocking(move || store.log_lines(&id)).await?;
    let mut text = lines.join("\n");
    text.push('\n');
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

/// Serves until Ctrl-C.
pub async fn serve(addr: &str, store: Store) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
