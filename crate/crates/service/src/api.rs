use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rubicon_core::consistency::SchemeSelector;
use rubicon_core::diagnostics::{Diagnostic, DiagnosticCode};
use rubicon_core::model::Schema;
use serde::Deserialize;
use serde_json::json;

use crate::state::{Annotator, RejectKind, Rejection, Submission};

/// Shared handle; every write goes through the one mutex, so log appends
/// are serialized and never interleave.
pub type Shared = Arc<Mutex<Annotator>>;

fn lock(state: &Shared) -> MutexGuard<'_, Annotator> {
    state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl IntoResponse for Rejection {
    fn into_response(self) -> Response {
        let status = match self.kind {
            RejectKind::BadRequest => StatusCode::BAD_REQUEST,
            RejectKind::Forbidden => StatusCode::FORBIDDEN,
            RejectKind::NotFound => StatusCode::NOT_FOUND,
            RejectKind::Unprocessable => StatusCode::UNPROCESSABLE_ENTITY,
            RejectKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let codes: Vec<&str> = self.diagnostics.iter().map(|d| d.code.as_str()).collect();
        let body = json!({
            "accepted": false,
            "reasons": codes,
            "diagnostics": self.diagnostics,
        });
        (status, Json(body)).into_response()
    }
}

fn bad_request(code: DiagnosticCode, message: String) -> Rejection {
    Rejection {
        kind: RejectKind::BadRequest,
        diagnostics: vec![Diagnostic::new(code, message)],
    }
}

/// Parses a JSON body, turning serde errors into diagnostics.
fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, Rejection> {
    serde_json::from_slice(body)
        .map_err(|e| bad_request(DiagnosticCode::InvalidRequest, format!("invalid request body: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    annotator_id: String,
    schema: Schema,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GateAnswers {
    answers: Vec<usize>,
}

#[derive(Deserialize)]
struct SessionQuery {
    session: String,
}

#[derive(Deserialize)]
struct SchemeQuery {
    scheme: Option<String>,
}

async fn create_session(State(s): State<Shared>, body: axum::body::Bytes) -> Result<Response, Rejection> {
    let req: CreateSession = parse_body(&body)?;
    let session = lock(&s).create_session(&req.annotator_id, req.schema)?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn answer_gate(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Response, Rejection> {
    let req: GateAnswers = parse_body(&body)?;
    let outcome = lock(&s).answer_gate(&id, &req.answers)?;
    Ok(Json(outcome).into_response())
}

async fn tasks(State(s): State<Shared>, Query(q): Query<SessionQuery>) -> Result<Response, Rejection> {
    Ok(Json(lock(&s).tasks(&q.session)?).into_response())
}

async fn submit(State(s): State<Shared>, body: axum::body::Bytes) -> Result<Response, Rejection> {
    let req: Submission = parse_body(&body)?;
    let accepted = lock(&s).submit(req)?;
    Ok((StatusCode::CREATED, Json(accepted)).into_response())
}

async fn consistency(
    State(s): State<Shared>,
    Path(key): Path<String>,
    Query(q): Query<SchemeQuery>,
) -> Result<Response, Rejection> {
    let scheme = match q.scheme.as_deref() {
        None => SchemeSelector::Conventional,
        Some(name) => name
            .parse::<SchemeSelector>()
            .map_err(|e| bad_request(DiagnosticCode::UnknownSchema, e.to_string()))?,
    };
    Ok(Json(lock(&s).feedback(&key, scheme)?).into_response())
}

async fn export(State(s): State<Shared>) -> Response {
    let csv = lock(&s).export();
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response()
}

fn unknown_video(id: &str) -> Rejection {
    Rejection {
        kind: RejectKind::NotFound,
        diagnostics: vec![Diagnostic::new(
            DiagnosticCode::UnknownVideo,
            format!("unknown video {id}"),
        )],
    }
}

async fn video_meta(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, Rejection> {
    let app = lock(&s);
    let meta = app.video_meta(&id).ok_or_else(|| unknown_video(&id))?;
    Ok(Json(meta).into_response())
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("mp4") | Some("m4v") => "video/mp4",
        Some("webm") => "video/webm",
        Some("ogv") | Some("ogg") => "video/ogg",
        Some("mov") => "video/quicktime",
        _ => "application/octet-stream",
    }
}

async fn video(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, Rejection> {
    let path = lock(&s).project().video_file(&id).ok_or_else(|| unknown_video(&id))?;
    let bytes = tokio::fs::read(&path).await.map_err(|_| unknown_video(&id))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], Body::from(bytes)).into_response())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/gate", post(answer_gate))
        .route("/tasks", get(tasks))
        .route("/annotations", post(submit))
        .route("/instances/{key}/consistency", get(consistency))
        .route("/export", get(export))
        .route("/videos/{id}", get(video))
        .route("/videos/{id}/meta", get(video_meta))
        .with_state(state)
}
