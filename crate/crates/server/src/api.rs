//! HTTP JSON API over a state directory.

use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rigor_core::curation::{CurationError, CurationLabel, CurationStore, ItemView, NextItem};
use rigor_core::detectors::Criterion;
use rigor_core::pipeline::{stored_report, Layout};
use rigor_core::report::ReportFormat;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown criterion {0:?}")]
    UnknownCriterion(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid fields: {}", .0.join(", "))]
    Invalid(Vec<String>),
    #[error("report for {0} is pending")]
    Pending(Criterion),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.to_string();
        let (status, body) = match self {
            ApiError::UnknownCriterion(_) | ApiError::NotFound(_) => {
                (StatusCode::NOT_FOUND, json!({ "error": message }))
            }
            ApiError::Conflict(_) => (StatusCode::CONFLICT, json!({ "error": message })),
            ApiError::Invalid(fields) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": message, "fields": fields }),
            ),
            ApiError::Pending(c) => (
                StatusCode::NOT_FOUND,
                json!({ "status": "pending", "criterion": c }),
            ),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": message })),
        };
        (status, Json(body)).into_response()
    }
}

impl From<CurationError> for ApiError {
    fn from(e: CurationError) -> Self {
        match e {
            CurationError::NotFound(id) => ApiError::NotFound(format!("item {id}")),
            CurationError::Duplicate { .. } | CurationError::LeaseConflict { .. } => ApiError::Conflict(e.to_string()),
            CurationError::Invalid { fields } => ApiError::Invalid(fields),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

/// Shared between handlers: the state directory and the label store. The
/// store's mutex serializes label writes and lease dispatch.
pub struct AppState {
    pub layout: Layout,
    store: Mutex<CurationStore>,
}

impl AppState {
    pub fn new(layout: Layout, store: CurationStore) -> Self {
        Self {
            layout,
            store: Mutex::new(store),
        }
    }

    /// Opens the queues and label log under the layout root; new labels are
    /// appended to that log.
    pub fn open(layout: Layout) -> Result<Self, CurationError> {
        let store = CurationStore::open(&layout.root)?;
        Ok(Self::new(layout, store))
    }

    fn store(&self) -> MutexGuard<'_, CurationStore> {
        self.store.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

fn criterion(raw: &str) -> Result<Criterion, ApiError> {
    Criterion::from_str(raw).map_err(|_| ApiError::UnknownCriterion(raw.to_string()))
}

#[derive(Debug, Serialize)]
struct CriterionInfo {
    id: Criterion,
    description: &'static str,
    has_queue: bool,
    has_report: bool,
}

async fn list_criteria(State(state): State<Arc<AppState>>) -> Json<Vec<CriterionInfo>> {
    Json(
        Criterion::ALL
            .into_iter()
            .map(|c| CriterionInfo {
                id: c,
                description: c.description(),
                has_queue: state.layout.queue(c).exists(),
                has_report: state.layout.report(c, ReportFormat::Json).exists(),
            })
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    criterion: Option<String>,
    curator: Option<String>,
}

/// Wire form of [`NextItem`]; items go out as [`ItemView`], never with
/// their origin.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextResponse {
    Item { item: ItemView },
    Waiting { leased: usize },
    Done,
}

async fn queue_next(
    State(state): State<Arc<AppState>>,
    Query(q): Query<NextQuery>,
) -> Result<Json<NextResponse>, ApiError> {
    let curator = q.curator.filter(|s| !s.trim().is_empty());
    let (Some(raw), Some(curator)) = (&q.criterion, &curator) else {
        let missing = [("criterion", q.criterion.is_none()), ("curator", curator.is_none())];
        return Err(ApiError::Invalid(
            missing.iter().filter(|m| m.1).map(|m| m.0.to_string()).collect(),
        ));
    };
    let c = criterion(raw)?;
    let next = state.store().next_item(c, curator.trim(), Instant::now());
    Ok(Json(match next {
        NextItem::Item(item) => NextResponse::Item {
            item: ItemView::from(&item),
        },
        NextItem::Waiting { leased } => NextResponse::Waiting { leased },
        NextItem::Done => NextResponse::Done,
    }))
}

async fn post_label(
    State(state): State<Arc<AppState>>,
    body: Result<Json<serde_json::Value>, axum::extract::rejection::JsonRejection>,
) -> Result<(StatusCode, Json<CurationLabel>), ApiError> {
    let Json(value) = body.map_err(|_| ApiError::Invalid(vec!["body".into()]))?;
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let label = CurationLabel::from_json(&value, &now)?;
    state.store().record_label(label.clone(), Instant::now())?;
    Ok((StatusCode::CREATED, Json(label)))
}

#[derive(Debug, Deserialize)]
struct CriterionQuery {
    criterion: Option<String>,
}

async fn progress(
    State(state): State<Arc<AppState>>,
    Query(q): Query<CriterionQuery>,
) -> Result<Json<rigor_core::curation::Progress>, ApiError> {
    let raw = q.criterion.ok_or_else(|| ApiError::Invalid(vec!["criterion".into()]))?;
    Ok(Json(state.store().progress(criterion(&raw)?)))
}

#[derive(Debug, Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

async fn report(
    State(state): State<Arc<AppState>>,
    Path(raw): Path<String>,
    Query(q): Query<FormatQuery>,
) -> Result<Response, ApiError> {
    let c = criterion(&raw)?;
    let format = match q.format.as_deref() {
        None => ReportFormat::Json,
        Some(f) => ReportFormat::from_str(f).map_err(|_| ApiError::Invalid(vec!["format".into()]))?,
    };
    let text = stored_report(&state.layout, c, format)
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .ok_or(ApiError::Pending(c))?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], text).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/criteria", get(list_criteria))
        .route("/api/queue/next", get(queue_next))
        .route("/api/labels", post(post_label))
        .route("/api/progress", get(progress))
        .route("/api/reports/{criterion}", get(report))
        .with_state(state)
}

pub async fn serve(state: AppState, port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, root = %state.layout.root.display(), "serving curation API");
    axum::serve(listener, router(Arc::new(state))).await
}
