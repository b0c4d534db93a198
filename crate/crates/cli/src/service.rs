//! HTTP search service.
//!
//! | Method | Path            | Body / result                                 |
//! |--------|-----------------|-----------------------------------------------|
//! | POST   | `/v1/search`    | `{query, top_k}` -> `{results, degraded}`     |
//! | GET    | `/v1/faq/{id}`  | one FAQ entry, 404 if unknown                 |
//! | GET    | `/health`       | index size and scorer reachability            |
//!
//! Every endpoint answers 503 until the index has been built.

use std::sync::{Arc, OnceLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use faqrank_core::{FaqEngine, FaqEntry, FusedCandidate, Group};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    pub query: String,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub faq_id: String,
    pub question: String,
    pub answer: String,
    pub similarity: f64,
    pub relevance: f64,
    pub fused_score: f64,
    pub group: Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub results: Vec<SearchResult>,
    pub degraded: bool,
}

/// Runs a fused search and attaches entry text. Shared by the CLI and the
/// HTTP handler so both produce the same ranking.
pub fn search(engine: &FaqEngine, query: &str, top_k: usize) -> Result<SearchResponse, CliError> {
    let found = engine.search(query, top_k)?;
    let results = found
        .candidates
        .into_iter()
        .map(|c: FusedCandidate| {
            let entry = engine.entry(&c.faq_id).expect("candidates come from the corpus");
            SearchResult {
                question: entry.question.clone(),
                answer: entry.answer.clone(),
                faq_id: c.faq_id,
                similarity: c.similarity,
                relevance: c.relevance,
                fused_score: c.fused_score,
                group: c.group,
            }
        })
        .collect();
    Ok(SearchResponse {
        results,
        degraded: found.degraded,
    })
}

/// Shared handle to an engine that may still be loading.
#[derive(Clone, Default)]
pub struct AppState {
    engine: Arc<OnceLock<Arc<FaqEngine>>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ready(engine: FaqEngine) -> Self {
        let state = Self::new();
        state.set_engine(engine);
        state
    }

    /// Installs the engine; later calls are ignored.
    pub fn set_engine(&self, engine: FaqEngine) {
        let _ = self.engine.set(Arc::new(engine));
    }

    pub fn engine(&self) -> Option<Arc<FaqEngine>> {
        self.engine.get().cloned()
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

fn not_ready() -> ApiError {
    ApiError(StatusCode::SERVICE_UNAVAILABLE, "index not ready".into())
}

async fn search_handler(
    State(state): State<AppState>,
    body: Result<Json<SearchRequest>, JsonRejection>,
) -> Result<Json<SearchResponse>, ApiError> {
    let engine = state.engine().ok_or_else(not_ready)?;
    let Json(req) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    if req.top_k == 0 {
        return Err(ApiError(StatusCode::BAD_REQUEST, "top_k must be at least 1".into()));
    }
    // scorers may block on network I/O
    let result = tokio::task::spawn_blocking(move || search(&engine, &req.query, req.top_k))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    result
        .map(Json)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

async fn faq_handler(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<FaqEntry>, ApiError> {
    let engine = state.engine().ok_or_else(not_ready)?;
    engine
        .entry(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown faq id {id:?}")))
}

async fn health_handler(State(state): State<AppState>) -> Response {
    let Some(engine) = state.engine() else {
        return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"status": "starting"}))).into_response();
    };
    let probe = engine.clone();
    let reachable = tokio::task::spawn_blocking(move || probe.scorer().is_reachable())
        .await
        .unwrap_or(false);
    Json(json!({
        "status": "ok",
        "index_size": engine.index().doc_count(),
        "scorer": {"name": engine.scorer().name(), "reachable": reachable},
    }))
    .into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/search", post(search_handler))
        .route("/v1/faq/{id}", get(faq_handler))
        .route("/health", get(health_handler))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
