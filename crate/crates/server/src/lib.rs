//! HTTP/JSON API over loaded sessions.
//!
//! Each session lives under `<data_dir>/sessions/<id>/` as a copy of its
//! inputs plus a manifest. Chart bundles are written to `charts/` beside
//! them, so a restarted server answers exactly as before.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use eqlboard::difficulty::DifficultyScore;
use eqlboard::model::accuracy;
use eqlboard::scoring::{SplitConfig, WeightScheme};
use eqlboard::session::{resolve_scheme, Manifest, MethodParams, Session, DEFAULT_SPLITS};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::OnceCell;

pub const SESSIONS_DIR: &str = "sessions";
pub const CHARTS_DIR: &str = "charts";
pub const API_SCHEMA: u32 = 1;

#[derive(Debug)]
pub enum ApiError {
    /// Body is not valid JSON for the endpoint.
    BadRequest(String),
    NotFound { code: &'static str, what: String },
    Data(eqlboard::Error),
    Internal(String),
}

impl From<eqlboard::Error> for ApiError {
    fn from(e: eqlboard::Error) -> Self {
        ApiError::Data(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "ParseError", m),
            ApiError::NotFound { code, what } => (StatusCode::NOT_FOUND, code, format!("{what} not found")),
            ApiError::Data(e) => (StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "Internal", m),
        };
        json_response(status, &json!({ "error": code, "message": message }))
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn json_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let bytes = serde_json::to_vec(body).expect("serializable body");
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

type ScoreCell = Arc<OnceCell<Arc<Vec<DifficultyScore>>>>;

struct SessionEntry {
    session: Session,
    dir: PathBuf,
    /// One cell per canonical params key: the first request computes, the
    /// rest wait on it and then read the shared result.
    scores: Mutex<HashMap<String, ScoreCell>>,
}

impl SessionEntry {
    async fn scores(self: &Arc<Self>, params: &MethodParams) -> ApiResult<Arc<Vec<DifficultyScore>>> {
        let key = params.cache_key(self.session.seed());
        let cell = self.scores.lock().expect("score cache lock").entry(key).or_default().clone();
        let this = Arc::clone(self);
        let params = params.clone();
        cell.get_or_try_init(|| async move {
            tokio::task::spawn_blocking(move || this.session.compute_scores(&params))
                .await
                .map_err(|e| ApiError::Internal(e.to_string()))?
                .map(Arc::new)
                .map_err(ApiError::from)
        })
        .await
        .cloned()
    }

    fn chart_path(&self, bundle_id: &str) -> PathBuf {
        self.dir.join(CHARTS_DIR).join(format!("{bundle_id}.json"))
    }
}

/// Sessions known to the server, backed by `data_dir`.
pub struct AppState {
    data_dir: PathBuf,
    sessions: RwLock<BTreeMap<String, Arc<SessionEntry>>>,
}

impl AppState {
    /// Opens `data_dir`, reloading every session persisted there. Sessions
    /// that no longer load are skipped with a warning.
    pub fn open(data_dir: &Path) -> eqlboard::Result<Self> {
        let root = data_dir.join(SESSIONS_DIR);
        fs::create_dir_all(&root).map_err(|e| io_error(&root, e))?;
        let mut sessions = BTreeMap::new();
        for entry in fs::read_dir(&root).map_err(|e| io_error(&root, e))? {
            let dir = entry.map_err(|e| io_error(&root, e))?.path();
            let Some(id) = dir.file_name().and_then(|s| s.to_str()).map(String::from) else {
                continue;
            };
            match Session::open_dir(&dir) {
                Ok(session) => {
                    sessions.insert(id, Arc::new(SessionEntry { session, dir, scores: Mutex::default() }));
                }
                Err(e) => log::warn!("skipping session {id}: {e}"),
            }
        }
        Ok(AppState { data_dir: data_dir.to_path_buf(), sessions: RwLock::new(sessions) })
    }

    /// Loads the manifest's inputs into a new session and persists it.
    pub fn create_session(&self, manifest: &Manifest) -> eqlboard::Result<String> {
        let session = Session::load(manifest)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.data_dir.join(SESSIONS_DIR).join(&id);
        session.persist(&dir)?;
        let entry = Arc::new(SessionEntry { session, dir, scores: Mutex::default() });
        self.sessions.write().expect("session map lock").insert(id.clone(), entry);
        Ok(id)
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().expect("session map lock").keys().cloned().collect()
    }

    fn get(&self, id: &str) -> ApiResult<Arc<SessionEntry>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound { code: "UnknownSession", what: format!("session {id}") })
    }
}

fn io_error(path: &Path, source: std::io::Error) -> eqlboard::Error {
    eqlboard::Error::Io { path: path.to_path_buf(), source }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/models", get(models))
        .route("/sessions/{id}/difficulty", post(difficulty))
        .route("/sessions/{id}/leaderboard", post(leaderboard))
        .route("/sessions/{id}/charts/{bundle_id}", get(chart))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let manifest: Manifest = parse_body(&body)?;
    let id = tokio::task::spawn_blocking(move || state.create_session(&manifest))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(json_response(StatusCode::CREATED, &json!({ "session_id": id })))
}

async fn models(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let s = &entry.session;
    let models = s
        .runs()
        .iter()
        .map(|run| Ok(json!({ "model_id": run.model_id(), "accuracy": accuracy(run, s.corpus())? })))
        .collect::<eqlboard::Result<Vec<Value>>>()?;
    Ok(json_response(
        StatusCode::OK,
        &json!({
            "api_schema": API_SCHEMA,
            "session_id": id,
            "test_samples": s.corpus().test_len(),
            "embeddings": s.embedding_source(),
            "models": models,
        }),
    ))
}

fn score_json(s: &DifficultyScore) -> Value {
    json!({
        "method": s.method.to_string(),
        "params": s.params,
        "values": s.values,
        "undefined": s.undefined_ids,
        "warnings": s.warnings,
    })
}

async fn difficulty(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let params: MethodParams = parse_body(&body)?;
    let scores = entry.scores(&params).await?;
    Ok(json_response(
        StatusCode::OK,
        &json!({
            "api_schema": API_SCHEMA,
            "cache_key": params.cache_key(entry.session.seed()),
            "scores": scores.iter().map(score_json).collect::<Vec<_>>(),
        }),
    ))
}

/// Body of `POST /sessions/{id}/leaderboard`: method parameters plus the
/// split and weighting configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeaderboardRequest {
    #[serde(flatten)]
    pub method: MethodParams,
    #[serde(default)]
    pub splits: Option<SplitConfig>,
    #[serde(default)]
    pub case: Option<u8>,
    #[serde(default)]
    pub scheme: Option<WeightScheme>,
}

async fn leaderboard(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let req: LeaderboardRequest = parse_body(&body)?;
    let splits = req.splits.clone().unwrap_or_else(|| SplitConfig::equal_population(DEFAULT_SPLITS));
    let scheme = resolve_scheme(&splits, req.case, req.scheme.as_ref())?;
    let scores = entry.scores(&req.method).await?;
    let (view, bundle) = entry.session.leaderboard(&scores, &splits, &scheme)?;
    let bundle_id = bundle.bundle_id();
    let path = entry.chart_path(&bundle_id);
    if !path.exists() {
        write_atomic(&path, bundle.to_json().as_bytes()).map_err(|e| ApiError::Internal(e.to_string()))?;
    }
    Ok(json_response(
        StatusCode::OK,
        &json!({ "api_schema": API_SCHEMA, "view": view, "bundle_id": bundle_id }),
    ))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().expect("chart path has a parent");
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{}.tmp", uuid::Uuid::new_v4().simple()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

async fn chart(
    State(state): State<Arc<AppState>>,
    UrlPath((id, bundle_id)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let not_found = || ApiError::NotFound { code: "UnknownBundle", what: format!("chart bundle {bundle_id}") };
    if bundle_id.is_empty() || !bundle_id.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(not_found());
    }
    let bytes = fs::read(entry.chart_path(&bundle_id)).map_err(|_| not_found())?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}
