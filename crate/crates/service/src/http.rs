use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::header;
use axum::response::{Html, IntoResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use hrir_tcn_core::eval::TrialResponse;
use serde::de::DeserializeOwned;
use tower_http::services::ServeDir;

use crate::error::{Result, ServiceError};
use crate::sessions::{NewSession, Sessions};

const BUILTIN_INDEX: &str = include_str!("../static/index.html");

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("malformed body: {e}")))
}

fn trial_index(raw: &str) -> Result<usize> {
    raw.parse()
        .map_err(|_| ServiceError::BadRequest(format!("trial index `{raw}` is not a number")))
}

async fn create(State(s): State<Arc<Sessions>>, body: Bytes) -> Result<impl IntoResponse> {
    Ok(Json(s.create(&parse::<NewSession>(&body)?)?))
}

async fn info(State(s): State<Arc<Sessions>>, Path(id): Path<String>) -> Result<impl IntoResponse> {
    Ok(Json(s.info(&id)?))
}

async fn trial(State(s): State<Arc<Sessions>>, Path((id, k)): Path<(String, String)>) -> Result<impl IntoResponse> {
    Ok(Json(s.trial(&id, trial_index(&k)?)?))
}

async fn audio(State(s): State<Arc<Sessions>>, Path(token): Path<String>) -> Result<impl IntoResponse> {
    let wav = s.audio(&token)?;
    Ok(([(header::CONTENT_TYPE, "audio/wav"), (header::CACHE_CONTROL, "no-store")], wav))
}

async fn respond(State(s): State<Arc<Sessions>>, Path(id): Path<String>, body: Bytes) -> Result<impl IntoResponse> {
    let response: TrialResponse = parse(&body)?;
    Ok(Json(s.respond(&id, &response)?))
}

async fn result(State(s): State<Arc<Sessions>>, Path(id): Path<String>) -> Result<impl IntoResponse> {
    Ok(Json(s.result(&id)?.as_ref().clone()))
}

/// The JSON API plus the browser client: files from `static_dir` when
/// given, otherwise the built-in single-page client.
pub fn router(sessions: Arc<Sessions>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", post(create))
        .route("/api/session/{id}", get(info))
        .route("/api/session/{id}/trial/{k}", get(trial))
        .route("/api/session/{id}/response", post(respond))
        .route("/api/session/{id}/result", get(result))
        .route("/api/audio/{token}", get(audio))
        .with_state(sessions);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(BUILTIN_INDEX) })),
    }
}
