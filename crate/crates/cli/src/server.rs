//! JSON-over-HTTP API around the dialogue engine.
//!
//! Engine calls block on file I/O and locks, so every handler hands its work
//! to the blocking pool. Each mutation is persisted by the engine before the
//! handler returns, so an acknowledged request survives a crash.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use talechat_core::corpus::{CorpusError, ReviewDecision, Tale, TaleDraft};
use talechat_core::dialogue::{Engine, EngineError, TurnOutcome};
use talechat_core::monitor::{parse_window, valence_split, Gender, MonitorError, Segment, UserProfile};
use talechat_core::taxonomy::{Emotion, ThemeId};

pub const SESSION_HEADER: &str = "x-session-id";

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    supervisor_token: Option<String>,
}

impl AppState {
    /// Supervisor endpoints stay closed when `supervisor_token` is `None`.
    pub fn new(engine: Arc<Engine>, supervisor_token: Option<String>) -> Self {
        Self {
            engine,
            supervisor_token: supervisor_token.filter(|t| !t.is_empty()),
        }
    }

    fn is_supervisor(&self, headers: &HeaderMap) -> bool {
        let Some(expected) = &self.supervisor_token else {
            return false;
        };
        headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|given| given.trim() == expected)
    }

    fn require_supervisor(&self, headers: &HeaderMap) -> Result<(), ApiError> {
        if self.is_supervisor(headers) {
            Ok(())
        } else {
            Err(ApiError::new(StatusCode::FORBIDDEN, "supervisor token required"))
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::UnknownSession(_) | EngineError::UnknownUser(_) => StatusCode::NOT_FOUND,
            EngineError::SessionClosed(_) => StatusCode::CONFLICT,
            EngineError::BadCommand(_) => StatusCode::BAD_REQUEST,
            EngineError::Corpus(c) => match c {
                CorpusError::UnknownTale(_) => StatusCode::NOT_FOUND,
                CorpusError::NotPending { .. } => StatusCode::CONFLICT,
                CorpusError::MissingTags(_)
                | CorpusError::UnknownTheme(_)
                | CorpusError::EmptyField(_)
                | CorpusError::BadAge(_) => StatusCode::BAD_REQUEST,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
            EngineError::Monitor(m) => monitor_status(m),
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<MonitorError> for ApiError {
    fn from(e: MonitorError) -> Self {
        ApiError::new(monitor_status(&e), e.to_string())
    }
}

fn monitor_status(e: &MonitorError) -> StatusCode {
    match e {
        MonitorError::UnknownUser(_) | MonitorError::NotRegistered(_) => StatusCode::NOT_FOUND,
        MonitorError::BadAge(_) | MonitorError::BadSegment(_) | MonitorError::BadWindow(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs engine work on the blocking pool.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> ApiResult<T> + Send + 'static,
{
    let engine = state.engine.clone();
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))?
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/register", post(register))
        .route("/session", post(open_session))
        .route("/session/{id}", get(session_view))
        .route("/session/{id}/transcript", get(transcript))
        .route("/session/{id}/message", post(message))
        .route("/session/{id}/command", post(command))
        .route("/tales", get(search_tales).post(submit_tale))
        .route("/tales/{id}", get(get_tale))
        .route("/tales/{id}/review", post(review_tale))
        .route("/emotions", get(emotions))
        .route("/stats", get(stats))
        .route("/users/{id}/timeline", get(user_timeline))
        .route("/supervisor/alerts", get(alerts))
        .route("/supervisor/alerts/{user}/ack", post(acknowledge))
        .route("/supervisor/pending", get(pending_tales))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then closes every open session so that
/// their conversation logs are complete.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let engine = state.engine.clone();
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    let errors = tokio::task::spawn_blocking(move || engine.close_all())
        .await
        .unwrap_or_else(|e| vec![e.to_string()]);
    for e in errors {
        eprintln!("warning: while closing sessions: {e}");
    }
    Ok(())
}

pub async fn bind(addr: &str) -> std::io::Result<(tokio::net::TcpListener, SocketAddr)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ready" }))
}

// ---- users and sessions -------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub age: u32,
    pub gender: String,
    #[serde(default)]
    pub visible_to_supervisor: bool,
}

async fn register(State(state): State<AppState>, Json(req): Json<RegisterRequest>) -> ApiResult<Response> {
    let gender: Gender = req.gender.parse()?;
    let profile = blocking(&state, move |e| {
        Ok(e.monitor().register(req.age, gender, req.visible_to_supervisor)?)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(json!({ "user_id": profile.id }))).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    #[serde(default)]
    pub user_id: Option<String>,
}

async fn open_session(State(state): State<AppState>, body: Option<Json<SessionRequest>>) -> ApiResult<Response> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    let start = blocking(&state, move |e| Ok(e.open_session(req.user_id.as_deref())?)).await?;
    let id = HeaderValue::from_str(&start.session)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let mut response = (StatusCode::CREATED, Json(start)).into_response();
    response.headers_mut().insert(SESSION_HEADER, id);
    Ok(response)
}

/// The session header, when sent, must name the session in the path.
fn check_session_header(headers: &HeaderMap, id: &str) -> ApiResult<()> {
    match headers.get(SESSION_HEADER).map(|v| v.to_str()) {
        None => Ok(()),
        Some(Ok(given)) if given == id => Ok(()),
        Some(_) => Err(ApiError::bad_request(format!("{SESSION_HEADER} does not match session '{id}'"))),
    }
}

fn turn_response(outcome: TurnOutcome) -> ApiResult<Response> {
    if !outcome.storage_errors.is_empty() {
        return Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("turn could not be persisted: {}", outcome.storage_errors.join("; ")),
        ));
    }
    let id = HeaderValue::from_str(&outcome.session)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let mut response = Json(outcome).into_response();
    response.headers_mut().insert(SESSION_HEADER, id);
    Ok(response)
}

async fn session_view(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    check_session_header(&headers, &id)?;
    let view = blocking(&state, move |e| Ok(e.session_view(&id)?)).await?;
    Ok(Json(view).into_response())
}

async fn transcript(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    check_session_header(&headers, &id)?;
    let transcript = blocking(&state, move |e| Ok(e.transcript(&id)?)).await?;
    Ok(Json(transcript).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRequest {
    pub text: String,
}

async fn message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<MessageRequest>,
) -> ApiResult<Response> {
    check_session_header(&headers, &id)?;
    let outcome = blocking(&state, move |e| Ok(e.handle_message(&id, &req.text)?)).await?;
    turn_response(outcome)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandRequest {
    pub command: String,
}

async fn command(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<CommandRequest>,
) -> ApiResult<Response> {
    check_session_header(&headers, &id)?;
    let outcome = blocking(&state, move |e| Ok(e.handle_command(&id, &req.command)?)).await?;
    turn_response(outcome)
}

// ---- corpus ---------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
pub struct TaleQuery {
    #[serde(default)]
    pub query: String,
    /// Comma-separated emotion ids.
    #[serde(default)]
    pub emotions: String,
    /// Comma-separated theme ids.
    #[serde(default)]
    pub themes: String,
}

fn csv_items(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

fn parse_emotions<'a>(items: impl IntoIterator<Item = &'a str>) -> ApiResult<BTreeSet<Emotion>> {
    items
        .into_iter()
        .map(|p| p.parse::<Emotion>().map_err(|_| ApiError::bad_request(format!("unknown emotion '{p}'"))))
        .collect()
}

fn parse_themes<'a>(items: impl IntoIterator<Item = &'a str>) -> ApiResult<BTreeSet<ThemeId>> {
    items
        .into_iter()
        .map(|p| ThemeId::new(p).ok_or_else(|| ApiError::bad_request(format!("bad theme '{p}'"))))
        .collect()
}

async fn search_tales(State(state): State<AppState>, Query(q): Query<TaleQuery>) -> ApiResult<Response> {
    let emotions = parse_emotions(csv_items(&q.emotions))?;
    let themes = parse_themes(csv_items(&q.themes))?;
    let hits = blocking(&state, move |e| Ok(e.search_tales(&q.query, &emotions, &themes)?)).await?;
    Ok(Json(json!({ "tales": hits })).into_response())
}

/// Only approved tales are public; supervisors also see pending and rejected ones.
async fn get_tale(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let supervisor = state.is_supervisor(&headers);
    let tale = blocking(&state, move |e| {
        e.tale(&id)
            .filter(|t| supervisor || t.is_approved())
            .ok_or_else(|| ApiError::not_found(format!("unknown tale '{id}'")))
    })
    .await?;
    Ok(Json(tale).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub source_url: Option<String>,
    #[serde(default)]
    pub min_age: Option<u32>,
    /// Registered user id of the author, if any.
    #[serde(default)]
    pub user_id: Option<String>,
}

async fn submit_tale(State(state): State<AppState>, Json(req): Json<SubmitRequest>) -> ApiResult<Response> {
    let tale: Tale = blocking(&state, move |e| {
        if let Some(u) = &req.user_id {
            if !e.monitor().is_registered(u) {
                return Err(EngineError::UnknownUser(u.clone()).into());
            }
        }
        let draft = TaleDraft {
            title: req.title,
            body: req.body,
            source_url: req.source_url,
            min_age: req.min_age,
        };
        Ok(e.submit_tale(draft, req.user_id.as_deref())?)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(tale)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Reject,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewRequest {
    pub decision: Decision,
    #[serde(default)]
    pub emotions: Vec<String>,
    #[serde(default)]
    pub themes: Vec<String>,
}

async fn review_tale(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<ReviewRequest>,
) -> ApiResult<Response> {
    state.require_supervisor(&headers)?;
    let decision = match req.decision {
        Decision::Approve => ReviewDecision::Approve {
            emotions: parse_emotions(req.emotions.iter().map(String::as_str))?,
            themes: parse_themes(req.themes.iter().map(String::as_str))?,
        },
        Decision::Reject => ReviewDecision::Reject,
    };
    let tale = blocking(&state, move |e| Ok(e.review_tale(&id, decision)?)).await?;
    Ok(Json(tale).into_response())
}

async fn pending_tales(State(state): State<AppState>, headers: HeaderMap) -> ApiResult<Response> {
    state.require_supervisor(&headers)?;
    let pending: Vec<Tale> = blocking(&state, |e| {
        Ok(e.knowledge()
            .corpus
            .tales
            .values()
            .filter(|t| t.status == talechat_core::corpus::TaleStatus::Pending)
            .cloned()
            .collect())
    })
    .await?;
    Ok(Json(json!({ "tales": pending })).into_response())
}

#[derive(Debug, Serialize)]
struct CardView<'a> {
    id: &'a str,
    name: &'a str,
    positive: bool,
    definition: &'a str,
    related_terms: &'a [String],
    video_urls: &'a [String],
}

/// The 30 emotion cards in registry order.
async fn emotions(State(state): State<AppState>) -> ApiResult<Response> {
    let body = blocking(&state, |e| {
        let k = e.knowledge();
        let cards: Vec<CardView<'_>> = Emotion::ALL
            .iter()
            .map(|em| {
                let card = k.corpus.card(*em);
                CardView {
                    id: em.id(),
                    name: em.display_name(),
                    positive: em.is_positive(),
                    definition: card.map_or("", |c| c.definition.as_str()),
                    related_terms: card.map_or(&[], |c| c.related_terms.as_slice()),
                    video_urls: card.map_or(&[], |c| c.video_urls.as_slice()),
                }
            })
            .collect();
        serde_json::to_vec(&json!({ "emotions": cards }))
            .map_err(|err| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, err.to_string()))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

// ---- monitoring -----------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
pub struct StatsQuery {
    #[serde(default)]
    pub gender: Option<String>,
    #[serde(default)]
    pub age_bucket: Option<String>,
}

async fn stats(State(state): State<AppState>, Query(q): Query<StatsQuery>) -> ApiResult<Response> {
    let segment = Segment {
        gender: q.gender.as_deref().filter(|s| !s.is_empty()).map(str::parse).transpose()?,
        age_bucket: q.age_bucket.as_deref().filter(|s| !s.is_empty()).map(str::parse).transpose()?,
    };
    let stats = blocking(&state, move |e| Ok(e.monitor().emotion_stats(segment))).await?;
    let split = valence_split(&stats);
    Ok(Json(json!({
        "segment": segment.to_string(),
        "total": stats.total,
        "empty": stats.empty,
        "valence": split,
        "emotions": stats
            .counts
            .iter()
            .zip(&stats.percentages)
            .map(|((e, c), (_, p))| json!({ "emotion": e, "count": c, "percentage": p }))
            .collect::<Vec<_>>(),
    }))
    .into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct TimelineQuery {
    #[serde(default)]
    pub window: Option<String>,
}

async fn user_timeline(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TimelineQuery>,
) -> ApiResult<Response> {
    let window = parse_window(q.window.as_deref().unwrap_or("1d"))?;
    let buckets = blocking(&state, move |e| Ok(e.monitor().timeline(&id, window)?)).await?;
    Ok(Json(json!({ "buckets": buckets })).into_response())
}

async fn alerts(State(state): State<AppState>, headers: HeaderMap) -> ApiResult<Response> {
    state.require_supervisor(&headers)?;
    let alerts = blocking(&state, |e| Ok(e.monitor().alerts())).await?;
    Ok(Json(json!({ "alerts": alerts })).into_response())
}

async fn acknowledge(State(state): State<AppState>, Path(user): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    state.require_supervisor(&headers)?;
    let n = blocking(&state, move |e| {
        let visible = e.monitor().profile(&user).as_ref().is_some_and(|p: &UserProfile| p.visible_to_supervisor);
        if !visible {
            return Err(ApiError::not_found(format!("no supervised user '{user}'")));
        }
        Ok(e.monitor().acknowledge_alarms(&user)?)
    })
    .await?;
    Ok(Json(json!({ "acknowledged": n })).into_response())
}
