//! HTTP service over a loaded [`Engine`].
//!
//! `POST /query`, `GET /tables/{id}`, `GET /stats` and `GET /health`. The
//! engine is installed once loading finishes; until then every endpoint
//! answers 503.

use std::net::SocketAddr;
use std::sync::{Arc, OnceLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::engine::{Engine, TableMatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub question: String,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub results: Vec<TableMatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// Shared handle; the engine slot is filled once.
#[derive(Clone, Default)]
pub struct AppState {
    engine: Arc<OnceLock<Arc<Engine>>>,
}

impl AppState {
    pub fn loading() -> AppState {
        AppState::default()
    }

    pub fn ready(engine: Engine) -> AppState {
        let state = AppState::default();
        state.install(engine);
        state
    }

    /// Installs the engine; later calls are ignored.
    pub fn install(&self, engine: Engine) {
        let _ = self.engine.set(Arc::new(engine));
    }

    pub fn engine(&self) -> Option<Arc<Engine>> {
        self.engine.get().cloned()
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: message.into() })).into_response()
}

fn not_ready() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "artifacts are loading")
}

async fn health(State(state): State<AppState>) -> Response {
    match state.engine() {
        Some(_) => Json(serde_json::json!({ "status": "ready" })).into_response(),
        None => not_ready(),
    }
}

async fn stats(State(state): State<AppState>) -> Response {
    match state.engine() {
        Some(engine) => Json(engine.stats()).into_response(),
        None => not_ready(),
    }
}

async fn table(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(engine) = state.engine() else {
        return not_ready();
    };
    match engine.preview(&id) {
        Some(preview) => Json(preview).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown table `{id}`")),
    }
}

async fn query(State(state): State<AppState>, body: Result<Json<QueryRequest>, JsonRejection>) -> Response {
    let Some(engine) = state.engine() else {
        return not_ready();
    };
    let Json(req) = match body {
        Ok(b) => b,
        Err(rejection) => return error(StatusCode::BAD_REQUEST, rejection.body_text()),
    };
    let k = req.k.unwrap_or(engine.config().online.top_k);
    if k == 0 {
        return error(StatusCode::BAD_REQUEST, "k must be at least 1");
    }
    let result = tokio::task::spawn_blocking(move || engine.online_query(&req.question, k)).await;
    match result {
        Ok(Ok(results)) => Json(QueryResponse { results }).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/query", post(query))
        .route("/tables/{id}", get(table))
        .route("/stats", get(stats))
        .route("/health", get(health))
        .with_state(state)
}

/// Binds `addr`, loads artifacts in the background and serves until the
/// process is interrupted.
pub async fn serve(cfg: PipelineConfig, addr: SocketAddr) -> anyhow::Result<()> {
    let state = AppState::loading();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match Engine::load(&cfg) {
        Ok(engine) => {
            loader.install(engine);
            tracing::info!("artifacts loaded");
        }
        Err(e) => tracing::error!(error = %e, "failed to load artifacts"),
    });
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
