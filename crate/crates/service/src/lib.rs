//! HTTP front end of the localization test: session scheduling, stimulus
//! delivery, response collection and scoring.
//!
//! Participant-facing payloads carry trial indices and opaque audio tokens
//! only. HRTF types surface once a session is complete, in its result.

pub mod error;
pub mod http;
pub mod sessions;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use error::{Result, ServiceError};
pub use http::router;
pub use sessions::{NewSession, ResponseAck, ServiceConfig, SessionInfo, Sessions, TrialInfo};
pub use store::StimulusStore;

/// Binds `addr` and serves until the process ends.
pub async fn serve(
    addr: SocketAddr,
    sessions: Arc<Sessions>,
    static_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, sessions, static_dir).await
}

/// Serves on an already bound listener.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    sessions: Arc<Sessions>,
    static_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(sessions, static_dir)).await
}
