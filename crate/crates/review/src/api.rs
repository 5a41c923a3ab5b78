use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use kbc::{RelationConfig, RelationSpec, ScoredPrediction};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::accuracy::{accept_relation, Decision, ManualAccuracyReport};
use crate::sample::create_batch;
use crate::store::{RatingRequest, ReviewStore};
use crate::ReviewError;

/// Where the service keeps and finds its data.
#[derive(Debug, Clone)]
pub struct ReviewConfig {
    /// Review event log.
    pub store: PathBuf,
    /// Directory holding `<relation id>.retained.jsonl` files written by a
    /// completion run.
    pub retained_dir: PathBuf,
    pub relations: RelationConfig,
    /// Built review UI, served at `/` when set.
    pub static_dir: Option<PathBuf>,
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<ReviewStore>,
    pub relations: Arc<RelationConfig>,
    pub retained_dir: PathBuf,
}

impl AppState {
    pub fn new(config: &ReviewConfig) -> Result<Self, ReviewError> {
        Ok(Self {
            store: Arc::new(ReviewStore::open(&config.store)?),
            relations: Arc::new(config.relations.clone()),
            retained_dir: config.retained_dir.clone(),
        })
    }

    fn spec(&self, key: &str) -> Result<&RelationSpec, ReviewError> {
        self.relations
            .get(key)
            .map_err(|_| ReviewError::UnknownRelation(key.to_string()))
    }

    fn retained(&self, spec: &RelationSpec) -> Result<Vec<ScoredPrediction>, ReviewError> {
        let path = self.retained_dir.join(format!("{}.retained.jsonl", spec.id));
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => {
                return Err(ReviewError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l)
                    .map_err(|e| ReviewError::Invalid(format!("{}: {e}", path.display())))
            })
            .collect()
    }
}

impl ReviewError {
    fn status(&self) -> (StatusCode, &'static str) {
        match self {
            ReviewError::UnknownBatch(_) | ReviewError::UnknownItem(_) | ReviewError::UnknownRelation(_) => {
                (StatusCode::NOT_FOUND, "not_found")
            }
            ReviewError::Closed(_) => (StatusCode::CONFLICT, "batch_closed"),
            ReviewError::SampleTooLarge { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "sample_too_large"),
            ReviewError::NoRatings(_) => (StatusCode::UNPROCESSABLE_ENTITY, "no_ratings"),
            ReviewError::Invalid(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            ReviewError::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage_error"),
        }
    }
}

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let (status, code) = self.status();
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        (status, Json(json!({ "error": { "code": code, "message": self.to_string() } }))).into_response()
    }
}

type ApiResult<T> = Result<T, ReviewError>;

async fn list_batches(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.store.batches())
}

async fn get_batch(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.store.batch(&id)?))
}

#[derive(Deserialize)]
struct NextParams {
    annotator: Option<String>,
}

async fn next_item(
    State(s): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<NextParams>,
) -> ApiResult<Response> {
    let annotator = params
        .annotator
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| ReviewError::Invalid("annotator query parameter is required".into()))?;
    Ok(match s.store.next_item(&id, &annotator)? {
        Some(item) => Json(item).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn post_rating(State(s): State<AppState>, Json(req): Json<RatingRequest>) -> ApiResult<impl IntoResponse> {
    let stored = s.store.record_rating(req, Utc::now())?;
    Ok((StatusCode::CREATED, Json(stored)))
}

#[derive(Deserialize)]
struct NewBatch {
    relation: String,
    n: usize,
    #[serde(default)]
    seed: u64,
}

async fn post_batch(State(s): State<AppState>, Json(req): Json<NewBatch>) -> ApiResult<impl IntoResponse> {
    let spec = s.spec(&req.relation)?;
    let batch = create_batch(&s.retained(spec)?, spec, req.n, req.seed)?;
    Ok((StatusCode::CREATED, Json(s.store.add_batch(batch)?)))
}

async fn close_batch(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.store.close_batch(&id)?))
}

#[derive(Serialize)]
struct RelationReport {
    #[serde(flatten)]
    report: ManualAccuracyReport,
    target_precision: f64,
    decision: Decision,
}

async fn get_report(State(s): State<AppState>, UrlPath(relation): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    let spec = s.spec(&relation)?;
    let report = s.store.relation_report(&spec.id)?;
    Ok(Json(RelationReport {
        decision: accept_relation(&report, spec),
        target_precision: spec.target_precision,
        report,
    }))
}

/// API routes under `/api/v1`, plus the UI bundle at `/` when given.
pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/batches", get(list_batches).post(post_batch))
        .route("/batches/{id}", get(get_batch))
        .route("/batches/{id}/next", get(next_item))
        .route("/batches/{id}/close", post(close_batch))
        .route("/ratings", post(post_rating))
        .route("/reports/{relation}", get(get_report))
        .with_state(state);
    let app = Router::new().nest("/api/v1", api);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    config: &ReviewConfig,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ReviewError> {
    let app = router(AppState::new(config)?, config.static_dir.as_deref());
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|source| ReviewError::Io {
            path: config.store.display().to_string(),
            source,
        })
}
