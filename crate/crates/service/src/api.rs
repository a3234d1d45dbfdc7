use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use clicksel::encoding::{Click, ClickSet, Polarity};
use clicksel::{BinaryMask, Error as CoreError, Image};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::OwnedMutexGuard;

use crate::store::{Session, SessionHandle};
use crate::{replay, AppState};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown session '{id}'"))
    }

    fn internal(err: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, err.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        Self::new(rejection.status(), rejection.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize)]
pub struct CreateRequest {
    image: String,
}

#[derive(Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub width: usize,
    pub height: usize,
}

/// Signed so that negative coordinates surface as out-of-bounds clicks
/// rather than as malformed JSON.
#[derive(Deserialize)]
pub struct ClickRequest {
    row: i64,
    col: i64,
    polarity: Polarity,
}

#[derive(Serialize, Deserialize)]
pub struct MaskResponse {
    pub mask: String,
    pub click_count: usize,
}

#[derive(Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub width: usize,
    pub height: usize,
    pub clicks: Vec<Click>,
    pub mask: String,
    pub created_at: u64,
}

pub fn encode_mask(mask: &BinaryMask) -> String {
    STANDARD.encode(mask.to_png_bytes())
}

fn decode_image(text: &str) -> ApiResult<Image> {
    let payload = match text.split_once(";base64,") {
        Some((prefix, rest)) if prefix.starts_with("data:") => rest,
        _ => text,
    };
    let bytes = STANDARD
        .decode(payload.trim())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("image is not valid base64: {e}")))?;
    Image::from_encoded(&bytes)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("image could not be decoded: {e}")))
}

pub async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "backend": state.pipeline().backend().name(),
        "sessions": state.sessions().len(),
    }))
}

pub async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<CreateResponse>)> {
    let Json(req) = body?;
    let limit = state.config().max_image_dim;
    let image = tokio::task::spawn_blocking(move || decode_image(&req.image))
        .await
        .map_err(ApiError::internal)??;
    let (height, width) = image.dims();
    if height > limit || width > limit {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("image is {width}x{height}; the limit is {limit} pixels per side"),
        ));
    }
    let session_id = state.sessions().insert(Session::new(image));
    Ok((StatusCode::CREATED, Json(CreateResponse { session_id, width, height })))
}

fn lookup(state: &AppState, id: &str) -> ApiResult<SessionHandle> {
    state.sessions().get(id).ok_or_else(|| ApiError::not_found(id))
}

/// Reruns the pipeline over `clicks` and stores the result. The session is
/// left untouched if the pipeline fails.
async fn commit(state: &AppState, mut session: OwnedMutexGuard<Session>, clicks: ClickSet) -> ApiResult<MaskResponse> {
    let pipeline = state.pipeline_handle();
    tokio::task::spawn_blocking(move || {
        let (mask, probability) = replay(&pipeline, &session.image, &clicks).map_err(ApiError::internal)?;
        let response = MaskResponse { mask: encode_mask(&mask), click_count: clicks.len() };
        session.clicks = clicks;
        session.mask = mask;
        session.probability = probability;
        Ok(response)
    })
    .await
    .map_err(ApiError::internal)?
}

pub async fn add_click(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ClickRequest>, JsonRejection>,
) -> ApiResult<Json<MaskResponse>> {
    let handle = lookup(&state, &id)?;
    let Json(req) = body?;
    let session = handle.lock_owned().await;
    let (h, w) = session.image.dims();
    let in_bounds = (0..h as i64).contains(&req.row) && (0..w as i64).contains(&req.col);
    if !in_bounds {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("click ({}, {}) is outside the {h}x{w} image", req.row, req.col),
        ));
    }
    let click = Click { row: req.row as usize, col: req.col as usize, polarity: req.polarity };
    let mut clicks = session.clicks.clone();
    clicks.push(click).map_err(|e| match e {
        CoreError::DuplicateClick { .. } => ApiError::new(StatusCode::CONFLICT, e.to_string()),
        other => ApiError::internal(other),
    })?;

    commit(&state, session, clicks).await.map(Json)
}

pub async fn undo_click(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<MaskResponse>> {
    let handle = lookup(&state, &id)?;
    let session = handle.lock_owned().await;
    if session.clicks.is_empty() {
        return Err(ApiError::new(StatusCode::CONFLICT, "no clicks to undo"));
    }
    let mut clicks = session.clicks.clone();
    clicks.pop();

    commit(&state, session, clicks).await.map(Json)
}

pub async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionSnapshot>> {
    let handle = lookup(&state, &id)?;
    let session = handle.lock().await;
    let (height, width) = session.image.dims();
    let created_at = session
        .created_at
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(Json(SessionSnapshot {
        session_id: id,
        width,
        height,
        clicks: session.clicks.as_slice().to_vec(),
        mask: encode_mask(&session.mask),
        created_at,
    }))
}

pub async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    if state.sessions().remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&id))
    }
}
