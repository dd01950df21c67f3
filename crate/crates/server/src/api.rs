//! HTTP/JSON session service.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fairslice_core::experiment::{
    ExperimentError, Outcome, Session, SessionConfig, SessionView, TraceStore, SUBJECT,
};
use fairslice_core::fixtures::lab_profile;
use fairslice_core::{Action, ProcedureId};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Milliseconds on some monotone-enough clock.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

struct Entry {
    session: Session,
    /// Replies already sent, by client action id.
    replies: HashMap<String, (StatusCode, Value)>,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<TraceStore>,
    sessions: Arc<Mutex<HashMap<String, Arc<Mutex<Entry>>>>>,
    clock: Clock,
    defaults: SessionConfig,
    counter: Arc<AtomicU64>,
}

impl AppState {
    /// `defaults` applies to sessions created without a config.
    pub fn new(store: TraceStore, defaults: SessionConfig, clock: Clock) -> Self {
        AppState {
            store: Arc::new(store),
            sessions: Arc::default(),
            clock,
            defaults,
            counter: Arc::default(),
        }
    }

    /// The in-memory session, or one rebuilt from its trace file.
    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        let mut map = self.sessions.lock().expect("session map lock");
        if let Some(e) = map.get(id) {
            return Ok(e.clone());
        }
        let record = match self.store.load(id) {
            Ok(r) => r,
            Err(ExperimentError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ExperimentError::NotFound(id.to_string()).into())
            }
            Err(e) => return Err(e.into()),
        };
        let session = Session::restore(record.header, record.lines)?;
        let entry = Arc::new(Mutex::new(Entry {
            session,
            replies: HashMap::new(),
        }));
        map.insert(id.to_string(), entry.clone());
        Ok(entry)
    }

    fn persist(&self, session: &mut Session) -> Result<(), ApiError> {
        let lines = session.take_new_lines();
        if !lines.is_empty() {
            self.store.append(session.id(), &lines)?;
        }
        Ok(())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/actions", post(submit_action))
        .route("/sessions/{id}/payment", get(get_payment))
        .route("/fixtures/profiles", get(fixture_profiles))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }

    fn body(&self) -> Value {
        json!({ "error": { "code": self.code, "message": self.message } })
    }
}

impl From<ExperimentError> for ApiError {
    fn from(e: ExperimentError) -> Self {
        let (status, code) = match &e {
            ExperimentError::BadId(_) => (StatusCode::BAD_REQUEST, "bad_id"),
            ExperimentError::Config(_) | ExperimentError::Profile { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "bad_config")
            }
            ExperimentError::Action(_) | ExperimentError::OffGrid { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "illegal_action")
            }
            ExperimentError::Exists(_) => (StatusCode::CONFLICT, "exists"),
            ExperimentError::Finished => (StatusCode::CONFLICT, "finished"),
            ExperimentError::Incomplete => (StatusCode::CONFLICT, "incomplete"),
            ExperimentError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    let text = if body.is_empty() { &b"{}"[..] } else { body };
    serde_json::from_slice(text).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub id: Option<String>,
    pub subject: String,
    pub config: Option<SessionConfig>,
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req: CreateSession = parse(&body)?;
    let now = (state.clock)();
    let id = req.id.unwrap_or_else(|| {
        let n = state.counter.fetch_add(1, Ordering::Relaxed);
        format!("s{now}-{n}")
    });
    let config = req.config.unwrap_or_else(|| state.defaults.clone());
    let session = Session::new(&id, &req.subject, config, now)?;
    let mut map = state.sessions.lock().expect("session map lock");
    if map.contains_key(&id) {
        return Err(ExperimentError::Exists(id).into());
    }
    state.store.create(session.header())?;
    let view = session.view(now);
    map.insert(
        id,
        Arc::new(Mutex::new(Entry {
            session,
            replies: HashMap::new(),
        })),
    );
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let entry = state.entry(&id)?;
    let mut e = entry.lock().expect("session lock");
    let now = (state.clock)();
    e.session.expire(now);
    state.persist(&mut e.session)?;
    Ok(Json(e.session.view(now)))
}

/// Either an answer to the pending query or a request to start the round clock.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    /// Client-chosen id; a repeated id gets the first reply again.
    pub action_id: Option<String>,
    pub action: Option<Action>,
    #[serde(default)]
    pub start_round: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ActionReply {
    pub outcome: Option<Outcome>,
    pub view: SessionView,
}

async fn submit_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Response {
    let req: ActionRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    let entry = match state.entry(&id) {
        Ok(e) => e,
        Err(e) => return e.into_response(),
    };
    let mut e = entry.lock().expect("session lock");
    if let Some((status, body)) = req.action_id.as_ref().and_then(|a| e.replies.get(a)) {
        return (*status, Json(body.clone())).into_response();
    }
    let (status, body) = match apply(&state, &mut e.session, &req) {
        Ok(reply) => (
            StatusCode::OK,
            serde_json::to_value(reply).expect("reply serializes"),
        ),
        Err(err) => (err.status, err.body()),
    };
    if let Some(a) = req.action_id {
        e.replies.insert(a, (status, body.clone()));
    }
    (status, Json(body)).into_response()
}

fn apply(
    state: &AppState,
    session: &mut Session,
    req: &ActionRequest,
) -> Result<ActionReply, ApiError> {
    let now = (state.clock)();
    let outcome = match (&req.action, req.start_round) {
        (Some(action), false) => {
            let outcome = session.submit(action, now);
            state.persist(session)?;
            Some(outcome?)
        }
        (None, true) => {
            if session.is_done() {
                return Err(ExperimentError::Finished.into());
            }
            session.start_round(now);
            None
        }
        _ => {
            return Err(ApiError::bad_request(
                "send exactly one of \"action\" or \"start_round\": true",
            ))
        }
    };
    Ok(ActionReply {
        outcome,
        view: session.view(now),
    })
}

async fn get_payment(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let entry = state.entry(&id)?;
    let e = entry.lock().expect("session lock");
    Ok(Json(
        serde_json::to_value(e.session.payment()?).expect("payment serializes"),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FixtureSummary {
    pub name: String,
    pub procedure: ProcedureId,
    pub display_name: String,
    pub agents: usize,
    /// The subject's desired pixels; the automata stay hidden.
    pub subject_desired: Vec<(u32, u32)>,
}

async fn fixture_profiles() -> Json<Vec<FixtureSummary>> {
    Json(
        ProcedureId::ALL
            .into_iter()
            .map(|id| FixtureSummary {
                name: id.code().to_ascii_lowercase(),
                procedure: id,
                display_name: id.display_name().to_string(),
                agents: id.agents(),
                subject_desired: lab_profile(id).agent(SUBJECT).desired_intervals(),
            })
            .collect(),
    )
}

pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
