//! HTTP/JSON front for collaborative search sessions.
//!
//! Every handler is a thin wrapper over `vircis_core::cis::Session`; the
//! registry only adds locking and error translation.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path as UrlPath, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use vircis_core::audio::decode_wav;
use vircis_core::cis::{MergedEntry, Session, SplitAssignment};
use vircis_core::ir::{default_stopwords, index_documents, load_corpus, InvertedIndex, ScoredDoc};
use vircis_core::recognizer::{Transcriber, Vocabulary};

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotFound,
    Conflict,
    BadInput,
    UnsupportedMedia,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::BadInput => StatusCode::BAD_REQUEST,
            ErrorCode::UnsupportedMedia => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn bad_input(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadInput, message)
    }
}

impl From<vircis_core::Error> for ApiError {
    fn from(err: vircis_core::Error) -> Self {
        use vircis_core::Error as E;
        let code = match &err {
            E::Format(_) | E::UnsupportedFormat(_) => ErrorCode::UnsupportedMedia,
            E::Io(_) | E::Model(_) | E::Indexing(_) => ErrorCode::Internal,
            _ => ErrorCode::BadInput,
        };
        ApiError::new(code, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Shared, read-only search resources plus the live session registry.
pub struct AppState {
    index: InvertedIndex,
    transcriber: Transcriber,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(index: InvertedIndex, vocabulary: Vocabulary) -> Self {
        Self {
            index,
            transcriber: Transcriber::new(vocabulary),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn transcriber(&self) -> &Transcriber {
        &self.transcriber
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("no session {id:?}")))
    }
}

/// Where the service finds its corpus and models.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServiceConfig {
    pub port: u16,
    /// Corpus directory, corpus manifest, or a saved index file.
    pub corpus: Option<PathBuf>,
    /// Directory of `*.hmm` word models.
    pub models: Option<PathBuf>,
}

impl ServiceConfig {
    /// Reads `VIRCIS_PORT`, `VIRCIS_CORPUS` and `VIRCIS_MODELS`.
    pub fn from_env() -> Result<Self, String> {
        let port = match std::env::var("VIRCIS_PORT") {
            Ok(p) => p.parse().map_err(|_| format!("VIRCIS_PORT: not a port: {p:?}"))?,
            Err(_) => DEFAULT_PORT,
        };
        Ok(Self {
            port,
            corpus: std::env::var_os("VIRCIS_CORPUS").map(PathBuf::from),
            models: std::env::var_os("VIRCIS_MODELS").map(PathBuf::from),
        })
    }

    pub fn build_state(&self) -> vircis_core::Result<AppState> {
        let index = match &self.corpus {
            Some(p) => load_index_or_corpus(p)?,
            None => index_documents(&[], &default_stopwords())?,
        };
        let vocabulary = match &self.models {
            Some(dir) => Vocabulary::load_dir(dir)?,
            None => Vocabulary::default(),
        };
        Ok(AppState::new(index, vocabulary))
    }
}

/// Accepts a saved index file as well as anything `load_corpus` reads.
pub fn load_index_or_corpus(path: &Path) -> vircis_core::Result<InvertedIndex> {
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        if text.starts_with("vircis-index") {
            return InvertedIndex::from_text(&text);
        }
    }
    index_documents(&load_corpus(path)?, &default_stopwords())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryView {
    pub query: String,
    pub results: Vec<ScoredDoc>,
}

/// Full session state. Field order and map ordering are fixed, so equal
/// sessions serialize to equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub collaborators: Vec<String>,
    pub histories: BTreeMap<String, Vec<HistoryView>>,
    pub merged: Vec<MergedEntry>,
    pub suggestions: BTreeMap<String, Vec<String>>,
}

impl SessionSnapshot {
    pub fn of(session: &Session) -> Self {
        let collaborators: Vec<String> = session.collaborators().iter().cloned().collect();
        let histories = session
            .history()
            .iter()
            .map(|(c, h)| {
                let views = h
                    .iter()
                    .map(|e| HistoryView {
                        query: e.query.clone(),
                        results: e.results.entries.clone(),
                    })
                    .collect();
                (c.clone(), views)
            })
            .collect();
        let suggestions = collaborators
            .iter()
            .map(|c| (c.clone(), session.suggest_queries(c).unwrap_or_default()))
            .collect();
        Self {
            session_id: session.session_id().to_string(),
            collaborators,
            histories,
            merged: session.merged().entries.clone(),
            suggestions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinRequest {
    pub collaborator_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextQuery {
    pub collaborator_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub transcript: Option<String>,
    pub individual_results: Vec<ScoredDoc>,
    pub merged_results: Vec<MergedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub collaborator_id: String,
    pub doc_id: String,
    pub relevant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedResponse {
    pub merged_results: Vec<MergedEntry>,
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_input(format!("invalid JSON body: {e}")))
}

fn lock(session: &Mutex<Session>) -> std::sync::MutexGuard<'_, Session> {
    // a panic mid-update cannot leave a half-applied change: every Session
    // mutation recomputes from history
    session.lock().unwrap_or_else(|p| p.into_inner())
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: CreateSession = parse_json(&body)?;
    let session = Session::new(req.session_id.clone())?;
    let snapshot = SessionSnapshot::of(&session);
    let mut sessions = state.sessions.lock().expect("registry lock");
    if sessions.contains_key(&req.session_id) {
        return Err(ApiError::new(
            ErrorCode::Conflict,
            format!("session {:?} already exists", req.session_id),
        ));
    }
    sessions.insert(req.session_id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(snapshot)).into_response())
}

async fn join_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<SessionSnapshot>> {
    let session = state.session(&id)?;
    let req: JoinRequest = parse_json(&body)?;
    let mut s = lock(&session);
    s.join(req.collaborator_id)?;
    Ok(Json(SessionSnapshot::of(&s)))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<SessionSnapshot>> {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(Json(SessionSnapshot::of(&s)))
}

async fn read_multipart(req: Request, state: &Arc<AppState>) -> ApiResult<(String, Bytes)> {
    let mut form = Multipart::from_request(req, state)
        .await
        .map_err(|e| ApiError::bad_input(e.body_text()))?;
    let mut collaborator = None;
    let mut audio = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_input(e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_input(e.body_text()))?;
        match name.as_str() {
            "collaborator_id" => {
                let text = String::from_utf8(data.to_vec())
                    .map_err(|_| ApiError::bad_input("collaborator_id is not UTF-8"))?;
                collaborator = Some(text.trim().to_string());
            }
            "audio" => audio = Some(data),
            _ => {}
        }
    }
    let collaborator = collaborator.ok_or_else(|| ApiError::bad_input("missing collaborator_id field"))?;
    let audio = audio.ok_or_else(|| ApiError::bad_input("missing audio field"))?;
    Ok((collaborator, audio))
}

async fn submit_query(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    req: Request,
) -> ApiResult<Json<QueryResponse>> {
    let session = state.session(&id)?;
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));

    let (collaborator, text, transcript) = if is_multipart {
        let (collaborator, audio) = read_multipart(req, &state).await?;
        require_member(&session, &collaborator)?;
        let clip = decode_wav(&audio)?;
        let worker = state.clone();
        let text = tokio::task::spawn_blocking(move || worker.transcriber.transcribe(&clip))
            .await
            .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))??;
        (collaborator, text.clone(), Some(text))
    } else {
        let body = Bytes::from_request(req, &state)
            .await
            .map_err(|e| ApiError::bad_input(e.body_text()))?;
        let q: TextQuery = parse_json(&body)?;
        (q.collaborator_id, q.text, None)
    };

    let mut s = lock(&session);
    let own = s.submit_query(&collaborator, &text, &state.index)?;
    Ok(Json(QueryResponse {
        transcript,
        individual_results: own.entries,
        merged_results: s.merged().entries.clone(),
    }))
}

fn require_member(session: &Mutex<Session>, collaborator: &str) -> ApiResult<()> {
    let s = lock(session);
    if s.is_member(collaborator) {
        Ok(())
    } else {
        Err(ApiError::bad_input(format!(
            "collaborator {collaborator:?} is not a member of session {:?}",
            s.session_id()
        )))
    }
}

async fn judge(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<MergedResponse>> {
    let session = state.session(&id)?;
    let req: JudgmentRequest = parse_json(&body)?;
    let mut s = lock(&session);
    let merged = s.judge(&req.collaborator_id, &req.doc_id, req.relevant)?;
    Ok(Json(MergedResponse {
        merged_results: merged.entries.clone(),
    }))
}

async fn split(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<SplitAssignment>> {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(Json(s.split()?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/collaborators", post(join_session))
        .route("/sessions/{id}/queries", post(submit_query))
        .route("/sessions/{id}/judgments", post(judge))
        .route("/sessions/{id}/split", get(split))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
