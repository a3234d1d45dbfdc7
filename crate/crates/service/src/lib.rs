//! HTTP session API for interactive selection.
//!
//! A client uploads an image, then adds or undoes clicks one at a time; every
//! change reruns the full pipeline over the whole click list and returns the
//! new mask as a base64 PNG.
//!
//! | method | path | success |
//! |---|---|---|
//! | `POST` | `/sessions` | 201 `{session_id, width, height}` |
//! | `POST` | `/sessions/{id}/clicks` | 200 `{mask, click_count}` |
//! | `DELETE` | `/sessions/{id}/clicks/last` | 200 `{mask, click_count}` |
//! | `GET` | `/sessions/{id}` | 200 `{session_id, width, height, clicks, mask, created_at}` |
//! | `DELETE` | `/sessions/{id}` | 204 |
//! | `GET` | `/health` | 200 |
//!
//! Errors come back as `{"error": "..."}`.

pub mod api;
mod store;

use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::{delete, get, post};
use axum::Router;
use clicksel::backend::ProbabilityBackend;
use clicksel::encoding::ClickSet;
use clicksel::simulator::Pipeline;
use clicksel::{BinaryMask, Image, ProbabilityMap, Result};

pub use store::{Session, SessionHandle, SessionStore};

pub type SharedPipeline = Pipeline<Arc<dyn ProbabilityBackend>>;

pub const DEFAULT_MAX_IMAGE_DIM: usize = 1024;
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Longest accepted image side, in pixels.
    pub max_image_dim: usize,
    pub session_ttl: Duration,
    /// Request bodies above this size are refused with 413 before decoding.
    pub max_body_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self::with_limits(DEFAULT_MAX_IMAGE_DIM, DEFAULT_SESSION_TTL)
    }
}

impl ServiceConfig {
    /// Sizes the body limit so that any RGB PNG within `max_image_dim` fits
    /// after base64 expansion.
    pub fn with_limits(max_image_dim: usize, session_ttl: Duration) -> Self {
        let raw = max_image_dim.saturating_mul(max_image_dim).saturating_mul(4);
        let max_body_bytes = raw.saturating_mul(4) / 3 + (1 << 20);
        Self { max_image_dim, session_ttl, max_body_bytes }
    }
}

struct Inner {
    pipeline: Arc<SharedPipeline>,
    sessions: SessionStore,
    config: ServiceConfig,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(pipeline: SharedPipeline, config: ServiceConfig) -> Self {
        let sessions = SessionStore::new(config.session_ttl);
        Self { inner: Arc::new(Inner { pipeline: Arc::new(pipeline), sessions, config }) }
    }

    pub fn pipeline(&self) -> &SharedPipeline {
        &self.inner.pipeline
    }

    pub(crate) fn pipeline_handle(&self) -> Arc<SharedPipeline> {
        self.inner.pipeline.clone()
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.inner.sessions
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }
}

/// Mask and probability map for a click list, computed from scratch. An empty
/// list gives the all-background mask and no probability map.
pub fn replay<B: ProbabilityBackend>(
    pipeline: &Pipeline<B>,
    image: &Image,
    clicks: &ClickSet,
) -> Result<(BinaryMask, Option<ProbabilityMap>)> {
    if clicks.is_empty() {
        let (h, w) = image.dims();
        return Ok((BinaryMask::new(h, w), None));
    }
    let seg = pipeline.run(image, clicks)?;
    Ok((seg.mask, Some(seg.probability)))
}

pub fn router(state: AppState) -> Router {
    let limit = state.config().max_body_bytes;
    Router::new()
        .route("/health", get(api::health))
        .route("/sessions", post(api::create_session))
        .route("/sessions/{id}", get(api::get_session).delete(api::delete_session))
        .route("/sessions/{id}/clicks", post(api::add_click))
        .route("/sessions/{id}/clicks/last", delete(api::undo_click))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Periodically drops idle sessions until the runtime shuts down.
pub fn spawn_sweeper(state: AppState) -> tokio::task::JoinHandle<()> {
    let period = (state.config().session_ttl / 2).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(period);
        loop {
            ticker.tick().await;
            state.sessions().sweep();
        }
    })
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    let sweeper = spawn_sweeper(state.clone());
    let result = axum::serve(listener, router(state)).await;
    sweeper.abort();
    result
}
