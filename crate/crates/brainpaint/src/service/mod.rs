//! HTTP job service over the render pipeline.
//!
//! Submissions are validated synchronously, then queued for a fixed pool of
//! render workers; clients poll the job and download a ZIP of the results.
//! All job state lives under one data directory, so a restarted service
//! picks up where the old one stopped.

mod archive;
mod jobs;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use brainpaint_core::atlas::{atlas_definition, Surface, BUILTIN_ATLASES};
use brainpaint_core::config::parse_config;
use brainpaint_core::gradient::NAMED_COLORS;
use brainpaint_core::pipeline::{self, PipelineError, PipelineOptions, ANIMATION_MANIFEST_FILE, MANIFEST_FILE};
use brainpaint_core::scene::ViewPreset;
use brainpaint_core::{Gradient, RunConfig};
use serde_json::json;
use tokio::sync::mpsc;

pub use archive::build_archive;
pub use jobs::{now_secs, valid_job_id, ErrorBody, JobRecord, JobState, JobStore};

/// Largest accepted CSV upload.
pub const DEFAULT_MAX_CSV_BYTES: usize = 5 * 1024 * 1024;
pub const DEFAULT_RETENTION_SECS: u64 = 3600;
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
/// Room for the config document and multipart framing on top of the CSV.
const BODY_SLACK: usize = 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Mesh assets used for every job, whatever the submitted config says.
    pub asset_root: PathBuf,
    pub workers: usize,
    pub queue_capacity: usize,
    pub retention: Duration,
    pub max_csv_bytes: usize,
    /// Threads per render; `None` shares the global pool.
    pub render_threads: Option<usize>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            data_dir: PathBuf::from("brainpaint-data"),
            asset_root: PathBuf::from("assets"),
            workers: 1,
            queue_capacity: 16,
            retention: Duration::from_secs(DEFAULT_RETENTION_SECS),
            max_csv_bytes: DEFAULT_MAX_CSV_BYTES,
            render_threads: None,
        }
    }
}

/// An HTTP error with the structured `{code, message, details}` body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                details: Vec::new(),
            },
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no job '{id}' (unknown or expired)"),
        )
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn pipeline_error_body(e: &PipelineError) -> ErrorBody {
    let code = match e {
        PipelineError::Config { .. } => "invalid_config",
        PipelineError::Input { .. } => "invalid_input",
        PipelineError::Render(_) => "render_failed",
        PipelineError::Io(_) => "io_failed",
    };
    ErrorBody {
        code: code.into(),
        message: e.to_string(),
        details: e.diagnostics(),
    }
}

struct Shared {
    cfg: ServiceConfig,
    store: JobStore,
    jobs: Mutex<HashMap<String, JobRecord>>,
    queue: mpsc::Sender<String>,
}

impl Shared {
    fn lookup(&self, id: &str) -> Result<JobRecord, ApiError> {
        if !valid_job_id(id) {
            return Err(ApiError::not_found(id));
        }
        let jobs = self.jobs.lock().expect("job table poisoned");
        match jobs.get(id) {
            Some(r) if !r.is_expired(now_secs()) => Ok(r.clone()),
            _ => Err(ApiError::not_found(id)),
        }
    }

    /// Stores `record` in memory and on disk.
    fn update(&self, record: JobRecord) {
        if let Err(e) = self.store.save(&record) {
            eprintln!("ERROR job_store cannot persist job {}: {e}", record.id);
        }
        self.jobs
            .lock()
            .expect("job table poisoned")
            .insert(record.id.clone(), record);
    }

    fn retention_secs(&self) -> u64 {
        self.cfg.retention.as_secs()
    }

    /// Drops finished jobs past their expiry, in memory and on disk.
    fn sweep(&self) {
        let now = now_secs();
        let expired: Vec<String> = {
            let mut jobs = self.jobs.lock().expect("job table poisoned");
            let ids: Vec<String> = jobs
                .values()
                .filter(|r| r.is_expired(now))
                .map(|r| r.id.clone())
                .collect();
            for id in &ids {
                jobs.remove(id);
            }
            ids
        };
        for id in expired {
            if let Err(e) = self.store.remove(&id) {
                eprintln!("ERROR job_store cannot delete expired job {id}: {e}");
            }
        }
    }
}

/// A running service: the router plus its background workers.
#[derive(Clone)]
pub struct Service {
    shared: Arc<Shared>,
}

impl Service {
    /// Opens the data directory, restores unexpired jobs, re-queues the
    /// ones a previous process left unfinished, and starts the workers.
    /// Must be called inside a tokio runtime.
    pub fn start(cfg: ServiceConfig) -> std::io::Result<Service> {
        let store = JobStore::open(&cfg.data_dir)?;
        let capacity = cfg.queue_capacity.max(1);
        let (tx, rx) = mpsc::channel(capacity);
        let shared = Arc::new(Shared {
            store,
            jobs: Mutex::new(HashMap::new()),
            queue: tx,
            cfg,
        });

        let now = now_secs();
        for mut record in shared.store.load_all()? {
            if record.is_expired(now) {
                shared.store.remove(&record.id)?;
                continue;
            }
            if !record.state.is_terminal() {
                record.state = JobState::Queued;
                if shared.queue.try_send(record.id.clone()).is_err() {
                    record.state = JobState::Failed;
                    record.expires_at = now + shared.retention_secs();
                    record.error = Some(ErrorBody {
                        code: "queue_full".into(),
                        message: "job could not be re-queued after a restart".into(),
                        details: Vec::new(),
                    });
                }
            }
            shared.update(record);
        }

        let rx = Arc::new(tokio::sync::Mutex::new(rx));
        for _ in 0..shared.cfg.workers.max(1) {
            tokio::spawn(worker(shared.clone(), rx.clone()));
        }
        let period = shared
            .cfg
            .retention
            .clamp(Duration::from_secs(1), Duration::from_secs(60));
        let sweeper = Arc::downgrade(&shared);
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                match sweeper.upgrade() {
                    Some(s) => s.sweep(),
                    None => break,
                }
            }
        });
        Ok(Service { shared })
    }

    pub fn router(&self) -> Router {
        let limit = self.shared.cfg.max_csv_bytes + BODY_SLACK;
        Router::new()
            .route("/healthz", get(|| async { "ok" }))
            .route("/api/atlases", get(atlases))
            .route("/api/presets", get(presets))
            .route("/api/render", post(submit).layer(DefaultBodyLimit::max(limit)))
            .route("/api/jobs/{id}", get(job_status))
            .route("/api/jobs/{id}/archive", get(job_archive))
            .route("/api/jobs/{id}/files/{name}", get(job_file))
            .with_state(self.shared.clone())
    }

    /// Current record of a job, if it exists and has not expired.
    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.shared.lookup(id).ok()
    }

    /// Runs one expiry sweep now instead of waiting for the timer.
    pub fn sweep(&self) {
        self.shared.sweep();
    }
}

async fn worker(shared: Arc<Shared>, rx: Arc<tokio::sync::Mutex<mpsc::Receiver<String>>>) {
    loop {
        let next = rx.lock().await.recv().await;
        let Some(id) = next else { break };
        let Ok(mut record) = shared.lookup(&id) else { continue };
        record.state = JobState::Running;
        shared.update(record.clone());

        let s = shared.clone();
        let job_id = id.clone();
        let result = tokio::task::spawn_blocking(move || {
            let (cfg, csv) = s.store.inputs(&job_id).map_err(|e| PipelineError::Io(e.to_string()))?;
            let opts = PipelineOptions {
                jobs: s.cfg.render_threads,
                ..PipelineOptions::default()
            };
            pipeline::run_pipeline_text(&cfg, &csv, &opts)
        })
        .await;

        match result {
            Ok(Ok(manifest)) => {
                record.state = JobState::Done;
                record.manifest = Some(manifest);
            }
            Ok(Err(e)) => {
                record.state = JobState::Failed;
                record.error = Some(pipeline_error_body(&e));
            }
            Err(join) => {
                record.state = JobState::Failed;
                record.error = Some(ErrorBody {
                    code: "internal".into(),
                    message: format!("render task failed: {join}"),
                    details: Vec::new(),
                });
            }
        }
        record.expires_at = now_secs() + shared.retention_secs();
        shared.update(record);
    }
}

fn parse_flag(text: &str) -> Result<bool, ApiError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "" | "0" | "false" | "no" | "off" => Ok(false),
        "1" | "true" | "yes" | "on" => Ok(true),
        other => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_field",
            format!("validate_only: expected true or false, got '{other}'"),
        )),
    }
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    let status = e.status();
    let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
        "payload_too_large"
    } else {
        "invalid_multipart"
    };
    ApiError::new(status, code, e.body_text())
}

struct Submission {
    csv: String,
    config: String,
    validate_only: bool,
}

async fn read_submission(mut form: Multipart, max_csv: usize) -> Result<Submission, ApiError> {
    let mut csv = None;
    let mut config = String::new();
    let mut validate_only = false;
    while let Some(mut field) = form.next_field().await.map_err(multipart_error)? {
        let name = field.name().unwrap_or_default().to_string();
        match name.as_str() {
            "csv" => {
                let mut bytes = Vec::new();
                while let Some(chunk) = field.chunk().await.map_err(multipart_error)? {
                    if bytes.len() + chunk.len() > max_csv {
                        return Err(ApiError::new(
                            StatusCode::PAYLOAD_TOO_LARGE,
                            "payload_too_large",
                            format!("CSV exceeds the {max_csv}-byte limit"),
                        ));
                    }
                    bytes.extend_from_slice(&chunk);
                }
                let text = String::from_utf8(bytes)
                    .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", "CSV is not UTF-8"))?;
                csv = Some(text);
            }
            "config" => config = field.text().await.map_err(multipart_error)?,
            "validate_only" => validate_only = parse_flag(&field.text().await.map_err(multipart_error)?)?,
            other => {
                return Err(ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "invalid_field",
                    format!("unexpected form field '{other}' (expected csv, config, validate_only)"),
                ))
            }
        }
    }
    let csv =
        csv.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing_csv", "form field 'csv' is required"))?;
    Ok(Submission {
        csv,
        config,
        validate_only,
    })
}

async fn submit(State(shared): State<Arc<Shared>>, form: Multipart) -> Result<Response, ApiError> {
    let sub = read_submission(form, shared.cfg.max_csv_bytes).await?;
    let mut cfg = parse_config(&sub.config).map_err(|e| {
        let mut body = pipeline_error_body(&PipelineError::from(e));
        body.code = "invalid_config".into();
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body,
        }
    })?;
    let id = jobs::new_job_id();
    cfg.asset_root = shared.cfg.asset_root.clone();
    cfg.output_dir = shared.store.output_dir(&id);

    let prepared = {
        let (cfg, csv) = (cfg.clone(), sub.csv.clone());
        tokio::task::spawn_blocking(move || pipeline::prepare(&cfg, &csv))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(|e| ApiError {
                status: StatusCode::BAD_REQUEST,
                body: pipeline_error_body(&e),
            })?
    };
    if sub.validate_only {
        let body = json!({
            "valid": true,
            "rows": prepared.table.rows.len(),
            "regions": prepared.table.region_order,
            "views": prepared.views.iter().map(|v| v.name.as_str()).collect::<Vec<_>>(),
            "warnings": prepared.warnings,
        });
        return Ok(Json(body).into_response());
    }

    let now = now_secs();
    let record = JobRecord {
        id: id.clone(),
        state: JobState::Queued,
        created_at: now,
        expires_at: now + shared.retention_secs(),
        manifest: None,
        error: None,
    };
    shared
        .store
        .create(&record, &sub.csv, &cfg)
        .map_err(|e| ApiError::internal(format!("cannot store job: {e}")))?;
    shared
        .jobs
        .lock()
        .expect("job table poisoned")
        .insert(id.clone(), record);
    if shared.queue.try_send(id.clone()).is_err() {
        shared.jobs.lock().expect("job table poisoned").remove(&id);
        let _ = shared.store.remove(&id);
        return Err(ApiError::new(
            StatusCode::TOO_MANY_REQUESTS,
            "queue_full",
            "render queue is full; retry later",
        ));
    }
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id }))).into_response())
}

async fn job_status(
    State(shared): State<Arc<Shared>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<JobRecord>, ApiError> {
    shared.lookup(&id).map(Json)
}

fn finished_manifest(record: &JobRecord) -> Result<&brainpaint_core::RunManifest, ApiError> {
    match (&record.state, &record.manifest) {
        (JobState::Done, Some(m)) => Ok(m),
        (JobState::Failed, _) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "job_failed",
            format!("job '{}' failed; it has no outputs", record.id),
        )),
        _ => Err(ApiError::new(
            StatusCode::CONFLICT,
            "job_not_done",
            format!("job '{}' has not finished", record.id),
        )),
    }
}

/// Names a finished job may serve: its images and frames plus manifests.
fn served_files(m: &brainpaint_core::RunManifest) -> Vec<String> {
    let mut names: Vec<String> = m.files().into_iter().map(String::from).collect();
    names.push(MANIFEST_FILE.into());
    if m.animation.is_some() {
        names.push(ANIMATION_MANIFEST_FILE.into());
    }
    names
}

async fn job_archive(State(shared): State<Arc<Shared>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let record = shared.lookup(&id)?;
    let names = served_files(finished_manifest(&record)?);
    let dir = shared.store.output_dir(&id);
    let zip = tokio::task::spawn_blocking(move || build_archive(&dir, &names))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(format!("cannot build archive: {e}")))?;
    let disposition = format!("attachment; filename=\"brainpaint-{id}.zip\"");
    Ok((
        [
            (header::CONTENT_TYPE, "application/zip".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        zip,
    )
        .into_response())
}

async fn job_file(
    State(shared): State<Arc<Shared>>,
    UrlPath((id, name)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let record = shared.lookup(&id)?;
    if !served_files(finished_manifest(&record)?).contains(&name) {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("job '{id}' has no file '{name}'"),
        ));
    }
    let bytes = tokio::fs::read(shared.store.output_dir(&id).join(&name))
        .await
        .map_err(|e| ApiError::internal(format!("cannot read {name}: {e}")))?;
    let mime = if name.ends_with(".png") {
        "image/png"
    } else {
        "application/json"
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn atlases(State(shared): State<Arc<Shared>>) -> Result<Json<serde_json::Value>, ApiError> {
    let root = shared.cfg.asset_root.clone();
    let list = tokio::task::spawn_blocking(move || {
        let mut names: Vec<String> = BUILTIN_ATLASES.iter().map(|s| s.to_string()).collect();
        if let Ok(dir) = std::fs::read_dir(&root) {
            let mut custom: Vec<String> = dir
                .filter_map(|e| e.ok())
                .filter(|e| e.path().join("atlas.tsv").is_file())
                .filter_map(|e| e.file_name().into_string().ok())
                .filter(|n| !names.contains(n))
                .collect();
            custom.sort();
            names.extend(custom);
        }
        names
            .iter()
            .filter_map(|name| atlas_definition(name, &root).ok())
            .map(|atlas| {
                let surfaces: BTreeMap<&str, bool> = [("pial", Surface::Pial), ("inflated", Surface::Inflated)]
                    .into_iter()
                    .map(|(n, s)| (n, atlas.verify_assets(&root, s).is_ok()))
                    .collect();
                json!({
                    "name": atlas.name,
                    "builtin": BUILTIN_ATLASES.contains(&atlas.name.as_str()),
                    "assets": surfaces,
                    "regions": atlas.regions,
                })
            })
            .collect::<Vec<_>>()
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(json!({ "atlases": list })))
}

async fn presets() -> Json<serde_json::Value> {
    let defaults = RunConfig::default();
    let gradient: Vec<String> = Gradient::default_gradient()
        .controls()
        .iter()
        .map(|c| c.to_hex())
        .collect();
    let views: Vec<serde_json::Value> = ViewPreset::ALL
        .iter()
        .map(|v| json!({ "name": v.name(), "scene": v.kind() }))
        .collect();
    let colors: BTreeMap<&str, String> = NAMED_COLORS.iter().map(|(n, c)| (*n, c.to_hex())).collect();
    Json(json!({
        "gradients": { "default": gradient },
        "views": views,
        "default_views": defaults.views,
        "surfaces": ["pial", "inflated"],
        "named_colors": colors,
        "defaults": {
            "atlas": defaults.atlas,
            "surface": defaults.surface,
            "background": defaults.background,
            "resolution": defaults.resolution,
            "glass_opacity": defaults.glass_opacity,
            "supersample": defaults.supersample,
        },
    }))
}

/// Serves until Ctrl-C.
pub async fn serve(cfg: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let service = Service::start(cfg)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("INFO listening http://{}", listener.local_addr()?);
    axum::serve(listener, service.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
