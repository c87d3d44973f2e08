//! HTTP+JSON front of the arena service.
//!
//! Rater endpoints authenticate with `Authorization: Bearer <token>` from
//! `/onboard`; admin endpoints take the configured admin token the same way.
//! Artifacts are fetched server-side under `/artifact/<slot>/...` so a rater
//! never learns where a site lives or which tool built it.

use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use arena_core::arena::{ArenaConfig, ArenaError, ArenaService, Choice, ProfileFields};
use arena_core::MatchId;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::config::write_atomic;

pub struct AppState {
    service: RwLock<ArenaService>,
    artifacts: Artifacts,
    /// Where `POST /admin/config` persists an accepted replacement.
    config_path: Option<PathBuf>,
}

pub type Shared = Arc<AppState>;

/// How slot locations are turned into bytes.
pub struct Artifacts {
    /// Base for relative bundle directories.
    pub root: PathBuf,
    /// `None` disables fetching of `http(s)` locations.
    pub client: Option<reqwest::Client>,
}

impl AppState {
    pub fn new(service: ArenaService, artifacts: Artifacts, config_path: Option<PathBuf>) -> Shared {
        Arc::new(Self {
            service: RwLock::new(service),
            artifacts,
            config_path,
        })
    }

    pub fn read(&self) -> RwLockReadGuard<'_, ArenaService> {
        self.service.read().expect("arena lock poisoned")
    }

    fn write(&self) -> RwLockWriteGuard<'_, ArenaService> {
        self.service.write().expect("arena lock poisoned")
    }
}

/// Client for remote artifacts. Installs the ring crypto provider first;
/// calling it more than once is harmless.
pub fn artifact_client() -> reqwest::Client {
    let _ = rustls::crypto::ring::default_provider().install_default();
    reqwest::Client::builder()
        .user_agent(concat!("arena/", env!("CARGO_PKG_VERSION")))
        .timeout(std::time::Duration::from_secs(20))
        .build()
        .expect("http client builds")
}

pub fn app(state: Shared) -> Router {
    Router::new()
        .route("/onboard", post(onboard))
        .route("/session", get(session))
        .route("/session/start", post(start_session))
        .route("/match", get(get_match))
        .route("/vote", post(vote))
        .route("/leaderboard", get(leaderboard))
        .route("/admin/leaderboard", get(admin_leaderboard))
        .route("/admin/config", post(admin_config))
        .route("/admin/export", get(admin_export))
        .route("/artifact/{slot}", get(artifact_bare))
        .route("/artifact/{slot}/", get(artifact_index))
        .route("/artifact/{slot}/{*path}", get(artifact_file))
        .fallback(|| async { Problem::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint") })
        .with_state(state)
}

/// `application/problem+json` error body with a stable `code`.
#[derive(Debug)]
pub struct Problem {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl Problem {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            code,
            detail: detail.into(),
        }
    }
}

impl From<ArenaError> for Problem {
    fn from(e: ArenaError) -> Self {
        let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for Problem {
    fn from(e: JsonRejection) -> Self {
        Self::new(e.status(), "bad-request", e.body_text())
    }
}

impl IntoResponse for Problem {
    fn into_response(self) -> Response {
        let body = json!({
            "type": format!("urn:arena:problem:{}", self.code),
            "title": self.status.canonical_reason().unwrap_or("Error"),
            "status": self.status.as_u16(),
            "code": self.code,
            "detail": self.detail,
        });
        let mut res = (self.status, Json(body)).into_response();
        res.headers_mut().insert(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/problem+json"),
        );
        res
    }
}

type ApiResult<T> = Result<Json<T>, Problem>;

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

fn rater(headers: &HeaderMap) -> Result<&str, Problem> {
    bearer(headers).ok_or_else(|| ArenaError::BadToken.into())
}

#[derive(Debug, Deserialize)]
struct OnboardBody {
    access_code: String,
    #[serde(flatten)]
    profile: ProfileFields,
}

async fn onboard(
    State(s): State<Shared>,
    body: Result<Json<OnboardBody>, JsonRejection>,
) -> ApiResult<arena_core::arena::OnboardReceipt> {
    let Json(body) = body?;
    Ok(Json(s.write().onboard(&body.access_code, body.profile)?))
}

async fn session(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<arena_core::arena::SessionView> {
    Ok(Json(s.read().session(rater(&headers)?)?))
}

async fn start_session(
    State(s): State<Shared>,
    headers: HeaderMap,
) -> ApiResult<arena_core::arena::SessionView> {
    Ok(Json(s.write().start_session(rater(&headers)?)?))
}

async fn get_match(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<arena_core::arena::MatchView> {
    Ok(Json(s.write().get_match(rater(&headers)?)?))
}

#[derive(Debug, Deserialize)]
struct VoteBody {
    match_id: MatchId,
    choice: Choice,
    /// Absent counts as not acknowledged.
    #[serde(default)]
    full_view_acknowledged: bool,
}

async fn vote(
    State(s): State<Shared>,
    headers: HeaderMap,
    body: Result<Json<VoteBody>, JsonRejection>,
) -> ApiResult<arena_core::arena::VoteReceipt> {
    let token = rater(&headers)?;
    let Json(body) = body?;
    let receipt = s
        .write()
        .submit_vote(token, &body.match_id, body.choice, body.full_view_acknowledged)?;
    Ok(Json(receipt))
}

async fn leaderboard(State(s): State<Shared>) -> ApiResult<Vec<arena_core::LeaderboardRow>> {
    Ok(Json(s.read().public_leaderboard()?))
}

async fn admin_leaderboard(
    State(s): State<Shared>,
    headers: HeaderMap,
) -> ApiResult<arena_core::arena::AdminLeaderboard> {
    Ok(Json(s.read().admin_leaderboard(bearer(&headers))?))
}

async fn admin_export(
    State(s): State<Shared>,
    headers: HeaderMap,
) -> ApiResult<arena_core::arena::service::AdminExport> {
    Ok(Json(s.read().export(bearer(&headers))?))
}

async fn admin_config(
    State(s): State<Shared>,
    headers: HeaderMap,
    body: Result<Json<serde_json::Value>, JsonRejection>,
) -> Result<Json<ArenaConfig>, Problem> {
    let Json(value) = body?;
    let mut service = s.write();
    // authorize before parsing so anonymous callers learn nothing about the schema
    service.check_admin(bearer(&headers))?;
    let config: ArenaConfig =
        serde_json::from_value(value).map_err(|e| ArenaError::Config(e.to_string()))?;
    service.replace_config(bearer(&headers), config)?;
    let accepted = service.config().clone();
    if let Some(path) = &s.config_path {
        write_atomic(path, &accepted.to_json_pretty()).map_err(|e| {
            tracing::error!("persisting replacement config: {e}");
            Problem::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", "config accepted but not persisted")
        })?;
    }
    Ok(Json(accepted))
}

async fn artifact_bare(Path(slot): Path<String>) -> Redirect {
    // relative links inside a bundle need the trailing slash
    Redirect::permanent(&format!("/artifact/{slot}/"))
}

async fn artifact_index(State(s): State<Shared>, Path(slot): Path<String>) -> Result<Response, Problem> {
    serve_artifact(&s, &slot, "").await
}

async fn artifact_file(
    State(s): State<Shared>,
    Path((slot, path)): Path<(String, String)>,
) -> Result<Response, Problem> {
    serve_artifact(&s, &slot, &path).await
}

fn unavailable(detail: &str) -> Problem {
    Problem::new(StatusCode::BAD_GATEWAY, "artifact-unavailable", detail)
}

fn missing() -> Problem {
    Problem::new(StatusCode::NOT_FOUND, "artifact-not-found", "no such file in this artifact")
}

async fn serve_artifact(s: &AppState, slot: &str, sub: &str) -> Result<Response, Problem> {
    let location = s.read().resolve_slot(slot)?.to_owned();
    // Error details below are deliberately generic: paths and URLs can name the tool.
    if location.starts_with("http://") || location.starts_with("https://") {
        let client = s
            .artifacts
            .client
            .as_ref()
            .ok_or_else(|| unavailable("remote artifacts are not proxied by this server"))?;
        fetch_remote(client, &location, sub).await
    } else {
        read_local(&s.artifacts.root, &location, sub).await
    }
}

async fn fetch_remote(client: &reqwest::Client, location: &str, sub: &str) -> Result<Response, Problem> {
    let base = reqwest::Url::parse(location).map_err(|_| unavailable("artifact location is invalid"))?;
    let target = if sub.is_empty() {
        base.clone()
    } else {
        base.join(sub).map_err(|_| missing())?
    };
    if target.origin() != base.origin() {
        return Err(missing());
    }
    let upstream = client.get(target).send().await.map_err(|e| {
        tracing::warn!("artifact fetch failed: {e}");
        unavailable("artifact could not be fetched")
    })?;
    if upstream.status() == reqwest::StatusCode::NOT_FOUND {
        return Err(missing());
    }
    if !upstream.status().is_success() {
        return Err(unavailable("artifact host returned an error"));
    }
    let content_type = upstream.headers().get(header::CONTENT_TYPE).cloned();
    let bytes = upstream
        .bytes()
        .await
        .map_err(|_| unavailable("artifact transfer was interrupted"))?;
    let mut res = bytes.into_response();
    if let Some(ct) = content_type {
        res.headers_mut().insert(header::CONTENT_TYPE, ct);
    }
    Ok(res)
}

/// `base` joined with `sub`, refusing anything that could climb out of it.
fn confined(base: &FsPath, sub: &str) -> Option<PathBuf> {
    let mut path = base.to_path_buf();
    for part in FsPath::new(sub).components() {
        match part {
            Component::Normal(p) => path.push(p),
            Component::CurDir => {}
            _ => return None,
        }
    }
    Some(path)
}

async fn read_local(root: &FsPath, location: &str, sub: &str) -> Result<Response, Problem> {
    let base = root.join(location);
    let mut path = confined(&base, sub).ok_or_else(missing)?;
    if tokio::fs::metadata(&path).await.map(|m| m.is_dir()).unwrap_or(false) {
        path.push("index.html");
    }
    // symlinks must not lead outside the bundle either
    let (real_base, real) = match (
        tokio::fs::canonicalize(&base).await,
        tokio::fs::canonicalize(&path).await,
    ) {
        (Ok(b), Ok(p)) => (b, p),
        _ => return Err(missing()),
    };
    if !real.starts_with(&real_base) {
        return Err(missing());
    }
    let bytes = tokio::fs::read(&real).await.map_err(|_| missing())?;
    Ok(([(header::CONTENT_TYPE, content_type(&real))], bytes).into_response())
}

fn content_type(path: &FsPath) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "html" | "htm" => "text/html; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "json" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "webp" => "image/webp",
        "ico" => "image/x-icon",
        "woff" => "font/woff",
        "woff2" => "font/woff2",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}
