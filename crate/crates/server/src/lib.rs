//! HTTP/JSON front end for the ediref pipeline.
//!
//! Pipeline commands run on the blocking pool; at most one command may
//! write to a given run directory at a time.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ediref_core::api::{
    execute, ApiError, Command, EvaluateRequest, Health, LrQuery, LrResponse, ParseRequest, RenderRequest,
    RenderResponse, RunRequest,
};
use ediref_core::evalkit::{build_report, EvaluationReport};
use ediref_core::pipeline::{RunManifest, RunOutcome};
use ediref_core::promptlab::{parse_answer, ParsedAnswer};
use ediref_core::training::lr_at_step;
use ediref_core::{Error, ErrorKind};
use serde::Deserialize;
use tokio::net::TcpListener;

#[derive(Clone, Default)]
pub struct AppState {
    busy: Arc<Mutex<HashSet<PathBuf>>>,
}

pub struct HttpError {
    status: StatusCode,
    body: ApiError,
}

impl From<Error> for HttpError {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Config => StatusCode::BAD_REQUEST,
            ErrorKind::Data => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Runtime => StatusCode::INTERNAL_SERVER_ERROR,
        };
        HttpError {
            status,
            body: ApiError::from(&e),
        }
    }
}

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, HttpError>;

/// Holds a run directory for the lifetime of one command.
struct DirLease {
    busy: Arc<Mutex<HashSet<PathBuf>>>,
    dir: PathBuf,
}

impl DirLease {
    fn acquire(state: &AppState, dir: &Path) -> Result<Self, HttpError> {
        let dir = std::path::absolute(dir).unwrap_or_else(|_| dir.to_path_buf());
        let mut busy = state.busy.lock().expect("lease set poisoned");
        if !busy.insert(dir.clone()) {
            return Err(HttpError {
                status: StatusCode::CONFLICT,
                body: ApiError {
                    kind: ErrorKind::Config,
                    message: format!("another command is writing to {}", dir.display()),
                },
            });
        }
        Ok(DirLease {
            busy: state.busy.clone(),
            dir,
        })
    }
}

impl Drop for DirLease {
    fn drop(&mut self) {
        if let Ok(mut busy) = self.busy.lock() {
            busy.remove(&self.dir);
        }
    }
}

async fn run(state: AppState, command: Command, request: RunRequest) -> ApiResult<RunOutcome> {
    let (_, out) = request.resolve()?;
    let lease = DirLease::acquire(&state, &out)?;
    tracing::info!(command = command.as_str(), out = %out.display(), "starting");
    let result = tokio::task::spawn_blocking(move || execute(command, &request))
        .await
        .map_err(|e| Error::Aborted(format!("worker panicked: {e}")))?;
    drop(lease);
    match &result {
        Ok(_) => tracing::info!(command = command.as_str(), "finished"),
        Err(e) => tracing::warn!(command = command.as_str(), error = %e, "failed"),
    }
    Ok(Json(result?))
}

async fn stats(State(s): State<AppState>, Json(r): Json<RunRequest>) -> ApiResult<RunOutcome> {
    run(s, Command::Stats, r).await
}

async fn train(State(s): State<AppState>, Json(r): Json<RunRequest>) -> ApiResult<RunOutcome> {
    run(s, Command::Train, r).await
}

async fn sweep(State(s): State<AppState>, Json(r): Json<RunRequest>) -> ApiResult<RunOutcome> {
    run(s, Command::Sweep, r).await
}

async fn prompt_eval(State(s): State<AppState>, Json(r): Json<RunRequest>) -> ApiResult<RunOutcome> {
    run(s, Command::PromptEval, r).await
}

async fn report(State(s): State<AppState>, Json(r): Json<RunRequest>) -> ApiResult<RunOutcome> {
    run(s, Command::Report, r).await
}

async fn evaluate(Json(r): Json<EvaluateRequest>) -> ApiResult<EvaluationReport> {
    Ok(Json(build_report(&r.preds, &r.golds)?))
}

async fn render(Json(r): Json<RenderRequest>) -> ApiResult<RenderResponse> {
    Ok(Json(RenderResponse { prompt: r.render()? }))
}

async fn parse(Json(r): Json<ParseRequest>) -> Json<ParsedAnswer> {
    Json(parse_answer(&r.completion))
}

async fn learning_rate(Query(q): Query<LrQuery>) -> Json<LrResponse> {
    Json(LrResponse {
        lr: lr_at_step(q.step, q.base, q.warmup),
    })
}

#[derive(Deserialize)]
struct ManifestQuery {
    dir: PathBuf,
}

async fn manifest(Query(q): Query<ManifestQuery>) -> ApiResult<RunManifest> {
    Ok(Json(RunManifest::load(&q.dir)?))
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/stats", post(stats))
        .route("/v1/train", post(train))
        .route("/v1/sweep", post(sweep))
        .route("/v1/prompt-eval", post(prompt_eval))
        .route("/v1/report", post(report))
        .route("/v1/evaluate", post(evaluate))
        .route("/v1/prompts/render", post(render))
        .route("/v1/prompts/parse", post(parse))
        .route("/v1/schedule/lr", get(learning_rate))
        .route("/v1/runs/manifest", get(manifest))
        .with_state(state)
}

/// Binds `addr` and returns the bound address with the serving future.
pub async fn bind(addr: SocketAddr) -> std::io::Result<(SocketAddr, impl std::future::Future<Output = std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let server = async move { axum::serve(listener, router(AppState::default())).await };
    Ok((local, server))
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::default()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
