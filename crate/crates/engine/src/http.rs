//! `/v1` HTTP routes.
//!
//! | route                 | body                | response             |
//! |-----------------------|---------------------|----------------------|
//! | `POST /v1/score`      | `ScoreRequest`      | `ScoreResponse`      |
//! | `POST /v1/advantages` | `AdvantagesRequest` | `AdvantagesResponse` |
//! | `POST /v1/eval`       | `EvalRequest`       | `EvalResponse`       |
//! | `GET /v1/health`      |                     | `Health`             |
//!
//! Request-level failures return `{"schema_version", "error": {"code", "message"}}`
//! with a 4xx/5xx status. Per-item failures are reported inside a 200 body.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sgr::SCHEMA_VERSION;

use crate::error::EngineError;
use crate::service::{handle_advantages, handle_eval, handle_health, handle_score, Engine};
use crate::service::{AdvantagesResponse, EvalResponse, Health, ScoreResponse};

const BODY_LIMIT: usize = 64 * 1024 * 1024;

struct ApiError(StatusCode, EngineError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "schema_version": SCHEMA_VERSION, "error": self.1 });
        (self.0, Json(body)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match e.code.as_str() {
            "BATCH_TOO_LARGE" => StatusCode::PAYLOAD_TOO_LARGE,
            "TIMEOUT" => StatusCode::SERVICE_UNAVAILABLE,
            "PROVIDER_UNAVAILABLE" => StatusCode::BAD_GATEWAY,
            "INTERNAL" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e)
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| EngineError::request(e.to_string()).into())
}

/// Runs a CPU-bound handler off the async workers, bounded by the request
/// timeout.
async fn run<Req, Resp, F>(engine: Arc<Engine>, body: Bytes, f: F) -> Result<Json<Resp>, ApiError>
where
    Req: DeserializeOwned + Send + 'static,
    Resp: Serialize + Send + 'static,
    F: FnOnce(&Engine, &Req) -> Result<Resp, EngineError> + Send + 'static,
{
    let req: Req = parse(&body)?;
    let limit = Duration::from_secs(engine.config.server.request_timeout_secs);
    let task = tokio::task::spawn_blocking(move || f(&engine, &req));
    match tokio::time::timeout(limit, task).await {
        Err(_) => Err(EngineError::new("TIMEOUT", format!("request exceeded {}s", limit.as_secs())).into()),
        Ok(Err(join)) => Err(EngineError::new("INTERNAL", join.to_string()).into()),
        Ok(Ok(out)) => Ok(Json(out?)),
    }
}

async fn score(State(engine): State<Arc<Engine>>, body: Bytes) -> Result<Json<ScoreResponse>, ApiError> {
    run(engine, body, handle_score).await
}

async fn advantages(State(engine): State<Arc<Engine>>, body: Bytes) -> Result<Json<AdvantagesResponse>, ApiError> {
    run(engine, body, handle_advantages).await
}

async fn eval(State(engine): State<Arc<Engine>>, body: Bytes) -> Result<Json<EvalResponse>, ApiError> {
    run(engine, body, handle_eval).await
}

async fn health(State(engine): State<Arc<Engine>>) -> Result<Json<Health>, ApiError> {
    tokio::task::spawn_blocking(move || Json(handle_health(&engine)))
        .await
        .map_err(|e| EngineError::new("INTERNAL", e.to_string()).into())
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/score", post(score))
        .route("/v1/advantages", post(advantages))
        .route("/v1/eval", post(eval))
        .route("/v1/health", get(health))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(engine)
}

/// Serves until ctrl-c.
pub async fn serve(engine: Arc<Engine>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(&engine.config.server.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
