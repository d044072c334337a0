//! Review service: serves the ranked candidate queue and pair images to
//! reviewers, records their labels in an append-only log and exposes the
//! report folded from that log.

mod error;
pub mod images;
pub mod log;
pub mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use leakcheck_core::audit::read_queue;
use leakcheck_core::{AuditReport, Registry};
use serde::Deserialize;
use tower_http::services::ServeDir;

pub use error::ServiceError;
pub use images::ImageRoots;
pub use log::LabelLog;
pub use state::{Ack, LabelSubmission, NextPair, PairDetail, ReviewState};

/// Environment variable naming the directory that holds dataset images.
pub const DATA_ROOT_ENV: &str = "LEAKCHECK_DATA_ROOT";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub report: PathBuf,
    pub queue: PathBuf,
    pub labels: PathBuf,
    pub registry: Option<PathBuf>,
    /// Falls back to `LEAKCHECK_DATA_ROOT`, then the working directory.
    pub data_root: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Mutex<ReviewState>>,
    images: Arc<ImageRoots>,
}

impl AppState {
    pub fn new(state: ReviewState, images: ImageRoots) -> Self {
        Self { inner: Arc::new(Mutex::new(state)), images: Arc::new(images) }
    }

    /// Loads report, queue and label log and derives image roots.
    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let report = AuditReport::read(&config.report)?;
        let queue = read_queue(&config.queue)?;
        let log = LabelLog::open(&config.labels)?;
        let data_root = config
            .data_root
            .clone()
            .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let images = match &config.registry {
            Some(p) => ImageRoots::from_registry(&Registry::load(p)?, &data_root),
            None => {
                let mut roots = ImageRoots::new();
                for id in [&report.config.synthetic_id, &report.config.real_id] {
                    roots.insert(id.clone(), data_root.join(id));
                }
                roots
            }
        };
        Ok(Self::new(ReviewState::new(report, queue, log)?, images))
    }

    pub fn lock(&self) -> MutexGuard<'_, ReviewState> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queue/next", get(next_pair))
        .route("/api/labels", post(submit_label))
        .route("/api/report", get(report))
        .route("/api/pairs/{pair_id}", get(pair))
        .route("/images/{dataset_id}/{*path}", get(image));
    let api = match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder_ui)),
    };
    api.with_state(state)
}

#[derive(Deserialize)]
struct NextQuery {
    reviewer: String,
}

async fn next_pair(State(s): State<AppState>, Query(q): Query<NextQuery>) -> Result<Json<NextPair>, ServiceError> {
    if q.reviewer.trim().is_empty() {
        return Err(ServiceError::MissingReviewer);
    }
    Ok(Json(s.lock().next_pair(&q.reviewer)))
}

async fn submit_label(State(s): State<AppState>, Json(sub): Json<LabelSubmission>) -> Result<Json<Ack>, ServiceError> {
    let st = s.clone();
    tokio::task::spawn_blocking(move || st.lock().submit(sub))
        .await
        .map_err(|e| ServiceError::Storage(leakcheck_core::Error::InvariantViolation(e.to_string())))?
        .map(Json)
}

async fn report(State(s): State<AppState>) -> Result<Json<AuditReport>, ServiceError> {
    s.lock().report().map(Json)
}

async fn pair(State(s): State<AppState>, Path(pair_id): Path<String>) -> Result<Json<PairDetail>, ServiceError> {
    s.lock().pair(&pair_id).map(Json)
}

async fn image(
    State(s): State<AppState>,
    Path((dataset_id, path)): Path<(String, String)>,
) -> Result<Response, ServiceError> {
    let file = s.images.resolve(&dataset_id, &path).ok_or(ServiceError::NotFound)?;
    let bytes = tokio::fs::read(&file)
        .await
        .map_err(|e| ServiceError::Storage(leakcheck_core::Error::io(&file, e)))?;
    Ok(([(header::CONTENT_TYPE, images::content_type(&file))], bytes).into_response())
}

async fn placeholder_ui() -> Html<&'static str> {
    Html(include_str!("placeholder.html"))
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Blocking entry point: builds a runtime with `threads` workers, binds
/// `listen` and serves.
pub fn run(config: &ServiceConfig, listen: SocketAddr, threads: usize) -> Result<(), ServiceError> {
    let state = AppState::load(config)?;
    let app = router(state, config.ui_dir.clone());
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(threads.max(1))
        .enable_all()
        .build()
        .map_err(|e| leakcheck_core::Error::io("tokio runtime", e))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| leakcheck_core::Error::io(listen.to_string(), e))?;
        eprintln!("review service listening on http://{}", listener.local_addr().unwrap_or(listen));
        serve(listener, app)
            .await
            .map_err(|e| leakcheck_core::Error::io(listen.to_string(), e).into())
    })
}
