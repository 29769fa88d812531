//! HTTP front end for the clarification service.
//!
//! Routes are thin wrappers over [`ClarifyService`]; service errors map to
//! status codes via [`ServiceError::status_code`], and every error body is
//! `{"error": "..."}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clarify_core::eval::PipelineKind;
use clarify_core::model::{Feedback, TurnId};
use clarify_core::service::ServiceError;
use clarify_core::ClarifyService;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(err: ServiceError) -> Self {
        let status = StatusCode::from_u16(err.status_code()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::warn!(error = %err, "request failed");
        }
        Self {
            status,
            message: err.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        Self::bad_request(rejection.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(rejection: PathRejection) -> Self {
        Self::bad_request(rejection.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type AppState = Arc<ClarifyService>;

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Deserialize)]
struct QueryBody {
    text: String,
}

#[derive(Debug, Deserialize)]
struct EvalBody {
    dataset_path: PathBuf,
    #[serde(default = "default_pipeline")]
    pipeline: String,
}

fn default_pipeline() -> String {
    PipelineKind::MultiAgent.as_str().to_owned()
}

async fn create_session(State(svc): State<AppState>) -> (StatusCode, Json<SessionCreated>) {
    let session_id = svc.create_session();
    (StatusCode::CREATED, Json(SessionCreated { session_id }))
}

async fn post_query(
    State(svc): State<AppState>,
    path: Result<Path<String>, PathRejection>,
    body: Result<Json<QueryBody>, JsonRejection>,
) -> ApiResult<clarify_core::service::TurnResponse> {
    let Path(session_id) = path?;
    let Json(body) = body?;
    Ok(Json(svc.post_query(&session_id, &body.text).await?))
}

async fn post_feedback(
    State(svc): State<AppState>,
    path: Result<Path<(String, u64)>, PathRejection>,
    body: Result<Json<Feedback>, JsonRejection>,
) -> ApiResult<clarify_core::service::FeedbackResponse> {
    let Path((session_id, turn_id)) = path?;
    let Json(feedback) = body?;
    Ok(Json(svc.post_feedback(&session_id, TurnId(turn_id), feedback).await?))
}

async fn get_session(
    State(svc): State<AppState>,
    Path(session_id): Path<String>,
) -> ApiResult<clarify_core::service::SessionState> {
    Ok(Json(svc.get_session(&session_id).await?))
}

async fn list_agents(State(svc): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "agents": svc.list_agents() }))
}

async fn run_eval(
    State(svc): State<AppState>,
    body: Result<Json<EvalBody>, JsonRejection>,
) -> ApiResult<clarify_core::eval::EvalReport> {
    let Json(body) = body?;
    let pipeline: PipelineKind = body
        .pipeline
        .parse()
        .map_err(|e: clarify_core::eval::EvalError| ApiError::bad_request(e.to_string()))?;
    Ok(Json(svc.run_eval(&body.dataset_path, pipeline).await?))
}

pub fn router(service: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/query", post(post_query))
        .route("/v1/sessions/{id}/turns/{turn_id}/feedback", post(post_feedback))
        .route("/v1/agents", get(list_agents))
        .route("/v1/eval/run", post(run_eval))
        .layer(CorsLayer::permissive())
        .with_state(service)
}

/// Serves until Ctrl-C, then writes the session snapshot if one is configured.
pub async fn serve(service: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(Arc::clone(&service)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await?;
    save_snapshot(&service).await
}

pub async fn save_snapshot(service: &ClarifyService) -> std::io::Result<()> {
    if let Some(path) = service.snapshot_path() {
        service.store().save(path).await?;
        tracing::info!(path = %path.display(), sessions = service.store().len(), "snapshot written");
    }
    Ok(())
}
