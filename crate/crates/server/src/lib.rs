//! Annotation service: hands designs to judges and appends their labels
//! to a JSONL log.
//!
//! Every acknowledged label has been written and synced to the log. Appends
//! go through one mutex, so concurrent submissions never interleave.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use gemset::labels::{read_jsonl, LabelRecord};
use gemset::metrics::{like_coverage, LabelMatrix};
use gemset::renderer::{render_svg, RenderStyle};
use gemset::{Catalog, Design};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tower_http::services::ServeDir;

const PLACEHOLDER: &str = include_str!("../static/index.html");
const TIMESTAMP: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Core(#[from] gemset::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct Config {
    pub designs: PathBuf,
    pub labels: PathBuf,
    pub catalog: Catalog,
    pub style: RenderStyle,
    /// Front-end bundle served at `/`; a placeholder page when `None`.
    pub static_dir: Option<PathBuf>,
}

struct Log {
    path: PathBuf,
    file: File,
    records: Vec<LabelRecord>,
}

/// Shared service state. The design corpus is immutable while serving.
pub struct AppState {
    designs: Vec<Design>,
    index: HashMap<String, usize>,
    catalog: Catalog,
    style: RenderStyle,
    static_dir: Option<PathBuf>,
    log: Mutex<Log>,
}

impl AppState {
    pub fn load(cfg: Config) -> Result<AppState, ServerError> {
        let designs = gemset::design::load_design_dir(&cfg.designs)?;
        let index = designs.iter().enumerate().map(|(i, d)| (d.design_id.clone(), i)).collect();
        let records = read_jsonl(&cfg.labels)?;
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&cfg.labels)
            .map_err(|e| ServerError::Io { path: cfg.labels.clone(), source: e })?;
        log::info!("serving {} designs, {} existing labels", designs.len(), records.len());
        Ok(AppState {
            designs,
            index,
            catalog: cfg.catalog,
            style: cfg.style,
            static_dir: cfg.static_dir,
            log: Mutex::new(Log { path: cfg.labels, file, records }),
        })
    }

    pub fn design_count(&self) -> usize {
        self.designs.len()
    }

    /// Up to `count` designs the judge has not labeled, in an order
    /// shuffled by a seed derived from the judge id.
    pub fn next_unlabeled(&self, judge_id: &str, count: usize) -> Vec<Descriptor> {
        let done: HashSet<String> = {
            let log = self.log.lock().expect("label log poisoned");
            log.records.iter().filter(|r| r.judge_id == judge_id).map(|r| r.design_id.clone()).collect()
        };
        let mut order: Vec<usize> = (0..self.designs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(judge_seed(judge_id)));
        order
            .into_iter()
            .filter(|&i| !done.contains(&self.designs[i].design_id))
            .take(count)
            .map(|i| Descriptor::of(&self.designs[i]))
            .collect()
    }

    /// Appends one label and syncs it before returning.
    pub fn record_label(&self, design_id: &str, judge_id: &str, label: u8) -> Result<LabelRecord, ApiError> {
        if !self.index.contains_key(design_id) {
            return Err(ApiError::NotFound(format!("unknown design {design_id}")));
        }
        let rec = LabelRecord {
            design_id: design_id.to_string(),
            judge_id: judge_id.to_string(),
            label,
            ts: chrono::Utc::now().format(TIMESTAMP).to_string(),
        };
        let mut log = self.log.lock().expect("label log poisoned");
        let line = format!("{}\n", rec.to_line());
        let Log { file, path, records } = &mut *log;
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .and_then(|_| file.sync_data())
            .map_err(|e| ApiError::Internal(format!("writing {}: {e}", path.display())))?;
        records.push(rec.clone());
        Ok(rec)
    }

    pub fn stats(&self) -> Stats {
        let records = self.log.lock().expect("label log poisoned").records.clone();
        let last = gemset::labels::latest(&records);
        let mut judges: BTreeMap<String, usize> = BTreeMap::new();
        let mut designs: BTreeMap<String, usize> = BTreeMap::new();
        for (d, j) in last.keys() {
            *judges.entry(j.clone()).or_default() += 1;
            *designs.entry(d.clone()).or_default() += 1;
        }
        let coverage = LabelMatrix::from_records(&records, None).ok().and_then(|m| like_coverage(&m, 0.5).ok());
        Stats {
            designs_total: self.designs.len(),
            labels_total: records.len(),
            judges,
            designs,
            like_coverage_at_half: coverage,
        }
    }

    pub fn svg(&self, design_id: &str) -> Result<String, ApiError> {
        let i = *self.index.get(design_id).ok_or_else(|| ApiError::NotFound(format!("unknown design {design_id}")))?;
        render_svg(&self.designs[i], &self.catalog, &self.style).map_err(|e| ApiError::Internal(e.to_string()))
    }
}

fn judge_seed(judge_id: &str) -> u64 {
    let h = Sha256::digest(judge_id.as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub design_id: String,
    pub svg_url: String,
    pub stones: usize,
}

impl Descriptor {
    fn of(d: &Design) -> Descriptor {
        Descriptor { design_id: d.design_id.clone(), svg_url: format!("/api/designs/{}/svg", d.design_id), stones: d.placements.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub designs_total: usize,
    pub labels_total: usize,
    /// Designs labeled per judge.
    pub judges: BTreeMap<String, usize>,
    /// Judges per labeled design.
    pub designs: BTreeMap<String, usize>,
    pub like_coverage_at_half: Option<f64>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Internal(m) => {
                log::error!("{m}");
                (StatusCode::INTERNAL_SERVER_ERROR, m)
            }
        };
        (status, Json(serde_json::json!({ "error": msg }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct DesignQuery {
    judge: Option<String>,
    count: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct LabelBody {
    design_id: String,
    judge_id: String,
    label: u8,
}

async fn designs(State(st): State<Arc<AppState>>, Query(q): Query<DesignQuery>) -> Result<Json<Vec<Descriptor>>, ApiError> {
    let judge = q.judge.filter(|j| !j.is_empty()).ok_or_else(|| ApiError::BadRequest("judge is required".into()))?;
    Ok(Json(st.next_unlabeled(&judge, q.count.unwrap_or(10))))
}

async fn design_svg(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let svg = st.svg(&id)?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

async fn post_label(State(st): State<Arc<AppState>>, body: Bytes) -> Result<Json<LabelRecord>, ApiError> {
    let b: LabelBody = serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("malformed label: {e}")))?;
    if b.label > 1 {
        return Err(ApiError::BadRequest("label must be 0 or 1".into()));
    }
    if b.judge_id.trim().is_empty() {
        return Err(ApiError::BadRequest("judge_id must not be empty".into()));
    }
    let st = st.clone();
    let rec = tokio::task::spawn_blocking(move || st.record_label(&b.design_id, &b.judge_id, b.label))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(rec))
}

async fn stats(State(st): State<Arc<AppState>>) -> Json<Stats> {
    Json(st.stats())
}

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER)
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/designs", get(designs))
        .route("/api/designs/{id}/svg", get(design_svg))
        .route("/api/labels", axum::routing::post(post_label))
        .route("/api/stats", get(stats));
    let app = match &state.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    };
    app.with_state(state)
}

/// Binds and serves until the process is interrupted.
pub async fn serve(state: AppState, addr: SocketAddr) -> Result<(), ServerError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServerError::Io { path: PathBuf::from(addr.to_string()), source: e })?;
    log::info!("listening on http://{}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServerError::Io { path: PathBuf::from(addr.to_string()), source: e })
}

/// Convenience for callers holding paths.
pub fn config(designs: &Path, labels: &Path, catalog: Catalog) -> Config {
    Config { designs: designs.to_path_buf(), labels: labels.to_path_buf(), catalog, style: RenderStyle::default(), static_dir: None }
}
