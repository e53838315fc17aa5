//! HTTP JSON API over a base database and named histories.
//!
//! Endpoints are documented in `docs/api.md` at the repository root.

pub mod api;
pub mod error;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::CorsLayer;

pub use error::ApiError;
pub use state::{AppState, MAIN_HISTORY, REPORT_CAPACITY};

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(api::health))
        .route("/api/history", get(api::list_histories).post(api::post_history))
        .route("/api/history/{id}", get(api::get_history))
        .route("/api/history/{id}/append", post(api::append_history))
        .route("/api/whatif", post(api::post_whatif))
        .route("/api/report/{id}", get(api::get_report))
        .route("/api/relation/{name}", get(api::get_relation))
        .fallback(api::not_found)
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
