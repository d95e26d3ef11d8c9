//! JSON-over-HTTP service: `POST /api/query` and `GET /api/health`, plus
//! optional static hosting of the chat UI from the same process.

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

use crate::grounding::GroundedAnswer;
use crate::kb_store::KbCounts;
use crate::llm_gateway::BackendKind;
use crate::pipeline::{Advisor, PipelineError, MAX_QUERY_CHARS};

/// Default bound on concurrently processed queries.
pub const DEFAULT_CONCURRENCY: usize = 8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRequest {
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceView {
    pub url: String,
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceView {
    pub text: String,
    pub references: Vec<ReferenceView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseView {
    pub name: String,
    pub video_url: String,
    pub instructions: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedicationView {
    pub name: String,
    pub description: String,
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryResponse {
    pub answer: Vec<SentenceView>,
    pub exercises: Vec<ExerciseView>,
    pub medications: Vec<MedicationView>,
    pub grounded: bool,
    pub disclaimer: String,
    pub cache_hit: bool,
}

impl QueryResponse {
    pub fn from_answer(answer: &GroundedAnswer, cache_hit: bool) -> Self {
        Self {
            answer: answer
                .sentences
                .iter()
                .map(|s| SentenceView {
                    text: s.text.clone(),
                    references: s
                        .references
                        .iter()
                        .map(|r| ReferenceView {
                            url: r.url.clone(),
                            title: r.title.clone(),
                            snippet: r.source_sentence.clone(),
                        })
                        .collect(),
                })
                .collect(),
            exercises: answer
                .exercises
                .iter()
                .map(|e| ExerciseView {
                    name: e.name.clone(),
                    video_url: e.video_url.clone(),
                    instructions: e.instructions.clone(),
                })
                .collect(),
            medications: answer
                .medications
                .iter()
                .map(|m| MedicationView {
                    name: m.name.clone(),
                    description: m.description.clone(),
                    url: m.url.clone(),
                })
                .collect(),
            grounded: answer.grounded,
            disclaimer: answer.disclaimer.clone(),
            cache_hit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub kb_counts: KbCounts,
    pub backend: BackendKind,
}

/// Shared service state. The advisor is installed once the knowledge base
/// has finished loading; until then every endpoint answers 503.
#[derive(Clone)]
pub struct ApiState {
    inner: Arc<Inner>,
}

struct Inner {
    advisor: OnceLock<Advisor>,
    backend: BackendKind,
    limiter: Semaphore,
}

impl ApiState {
    pub fn new(backend: BackendKind, concurrency: usize) -> Self {
        Self {
            inner: Arc::new(Inner {
                advisor: OnceLock::new(),
                backend,
                limiter: Semaphore::new(concurrency.max(1)),
            }),
        }
    }

    pub fn loaded(advisor: Advisor, concurrency: usize) -> Self {
        let state = Self::new(advisor.gateway.backend_kind(), concurrency);
        state.install(advisor);
        state
    }

    /// Makes the advisor available. Later calls are ignored.
    pub fn install(&self, advisor: Advisor) {
        let _ = self.inner.advisor.set(advisor);
    }

    pub fn advisor(&self) -> Option<&Advisor> {
        self.inner.advisor.get()
    }
}

pub fn router(state: ApiState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/query", post(query))
        .route("/api/health", get(health))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(err: PipelineError) -> Self {
        let status = match err {
            PipelineError::InvalidInput(_) => StatusCode::BAD_REQUEST,
            PipelineError::Generation(_) | PipelineError::Attribution(_) => StatusCode::BAD_GATEWAY,
            PipelineError::KnowledgeBase(_) | PipelineError::Config(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        Self::new(status, err.to_string())
    }
}

async fn query(
    State(state): State<ApiState>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(request) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let text = request.query.trim().to_string();
    let chars = text.chars().count();
    if chars == 0 || chars > MAX_QUERY_CHARS {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("query must have 1 to {MAX_QUERY_CHARS} characters, got {chars}"),
        ));
    }
    let advisor = state
        .advisor()
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "knowledge base is still loading"))?;

    let _permit = state
        .inner
        .limiter
        .acquire()
        .await
        .map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "service is shutting down"))?;
    let outcome = tokio::task::spawn_blocking(move || advisor.handle(&text))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;

    match outcome {
        Ok((answer, trace)) => {
            tracing::info!(
                trace = %serde_json::to_string(&trace).unwrap_or_default(),
                references = answer.reference_count(),
                "query handled"
            );
            Ok(Json(QueryResponse::from_answer(&answer, trace.cache_hit)))
        }
        Err(err) => {
            tracing::warn!(error = %err, "query failed");
            Err(err.into())
        }
    }
}

async fn health(State(state): State<ApiState>) -> Response {
    match state.advisor() {
        Some(advisor) => Json(HealthResponse {
            status: "ok".into(),
            kb_counts: advisor.kb.counts(),
            backend: state.inner.backend,
        })
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "loading", "backend": state.inner.backend })),
        )
            .into_response(),
    }
}
