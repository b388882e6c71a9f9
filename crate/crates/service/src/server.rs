//! JSON API over the engine: sessions, messages, traces, evaluation jobs.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{mpsc, Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ragdesk_core::dialogue::{ChatSession, ChatTurn, StepTimings};
use ragdesk_core::eval::{
    load_ground_truth, run_eval_with_progress, validate_against_store, EvalReport,
};
use ragdesk_core::retrieval::RetrieverKind;
use ragdesk_core::{AnswerTrace, SourceKind};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::AppConfig;
use crate::engine::Engine;

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub session_ttl: Duration,
    pub session_log: Option<PathBuf>,
    pub api_token: Option<String>,
    pub trace_capacity: usize,
    pub ground_truth: Option<PathBuf>,
    pub eval_iterations: usize,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            session_ttl: Duration::from_secs(3600),
            session_log: None,
            api_token: None,
            trace_capacity: 1000,
            ground_truth: None,
            eval_iterations: 3,
        }
    }
}

impl ServerOptions {
    pub fn from_config(cfg: &AppConfig) -> Self {
        Self {
            session_ttl: Duration::from_secs(cfg.server.session_ttl_secs),
            session_log: cfg.server.session_log.clone(),
            api_token: cfg.server.api_token.clone(),
            trace_capacity: cfg.server.trace_capacity,
            ground_truth: cfg.eval.ground_truth.clone(),
            eval_iterations: cfg.eval.iterations,
        }
    }
}

struct SessionSlot {
    session: Arc<tokio::sync::Mutex<ChatSession>>,
    last_used: Mutex<Instant>,
}

/// Keeps the most recent traces, dropping the oldest beyond capacity.
struct TraceStore {
    order: VecDeque<String>,
    by_id: HashMap<String, Arc<AnswerTrace>>,
    capacity: usize,
}

impl TraceStore {
    fn insert(&mut self, trace: Arc<AnswerTrace>) {
        if self
            .by_id
            .insert(trace.trace_id.clone(), trace.clone())
            .is_none()
        {
            self.order.push_back(trace.trace_id.clone());
        }
        while self.order.len() > self.capacity.max(1) {
            if let Some(old) = self.order.pop_front() {
                self.by_id.remove(&old);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running { done: usize, total: usize },
    Done { report: Box<EvalReport> },
    Failed { error: String },
}

struct EvalJob {
    id: String,
    kinds: Vec<RetrieverKind>,
    iterations: usize,
}

pub struct AppState {
    engine: Arc<Engine>,
    options: ServerOptions,
    sessions: Mutex<HashMap<String, Arc<SessionSlot>>>,
    traces: Mutex<TraceStore>,
    jobs: Arc<Mutex<HashMap<String, JobStatus>>>,
    eval_tx: Mutex<mpsc::Sender<EvalJob>>,
    session_log: Option<Mutex<File>>,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl AppState {
    /// Also starts the evaluation worker thread, which runs one job at a time.
    pub fn new(engine: Arc<Engine>, options: ServerOptions) -> std::io::Result<Arc<Self>> {
        let session_log = match &options.session_log {
            Some(p) => {
                if let Some(dir) = p.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                Some(Mutex::new(
                    OpenOptions::new().create(true).append(true).open(p)?,
                ))
            }
            None => None,
        };
        let (tx, rx) = mpsc::channel::<EvalJob>();
        let jobs = Arc::new(Mutex::new(HashMap::new()));
        {
            let engine = engine.clone();
            let jobs = jobs.clone();
            let ground_truth = options.ground_truth.clone();
            std::thread::Builder::new()
                .name("eval-worker".into())
                .spawn(move || {
                    for job in rx {
                        let status = run_job(&engine, ground_truth.as_deref(), &job, &jobs);
                        lock(&jobs).insert(job.id.clone(), status);
                    }
                })?;
        }
        Ok(Arc::new(Self {
            traces: Mutex::new(TraceStore {
                order: VecDeque::new(),
                by_id: HashMap::new(),
                capacity: options.trace_capacity,
            }),
            engine,
            options,
            sessions: Mutex::new(HashMap::new()),
            jobs,
            eval_tx: Mutex::new(tx),
            session_log,
        }))
    }

    /// Drops sessions idle for longer than the TTL; returns how many.
    pub fn evict_idle(&self) -> usize {
        let ttl = self.options.session_ttl;
        let mut sessions = lock(&self.sessions);
        let before = sessions.len();
        sessions.retain(|_, slot| lock(&slot.last_used).elapsed() <= ttl);
        before - sessions.len()
    }

    fn session(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        let mut sessions = lock(&self.sessions);
        let slot = sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))?;
        let mut last = lock(&slot.last_used);
        if last.elapsed() > self.options.session_ttl {
            drop(last);
            sessions.remove(id);
            return Err(ApiError::not_found("session", id));
        }
        *last = Instant::now();
        drop(last);
        Ok(slot)
    }

    fn log_turns(&self, session_id: &str, turns: &[ChatTurn]) {
        let Some(log) = &self.session_log else { return };
        let mut file = lock(log);
        for t in turns {
            let line = json!({
                "session_id": session_id,
                "role": t.role,
                "text": t.text,
                "timestamp": t.timestamp,
                "trace_id": t.trace_id,
            });
            if let Err(e) = writeln!(file, "{line}") {
                tracing::warn!(error = %e, "session log write failed");
            }
        }
    }
}

fn run_job(
    engine: &Engine,
    ground_truth: Option<&std::path::Path>,
    job: &EvalJob,
    jobs: &Mutex<HashMap<String, JobStatus>>,
) -> JobStatus {
    let Some(path) = ground_truth else {
        return JobStatus::Failed {
            error: "no ground truth configured".into(),
        };
    };
    let entries = match load_ground_truth(path) {
        Ok(e) => e,
        Err(e) => {
            return JobStatus::Failed {
                error: e.to_string(),
            }
        }
    };
    let snapshot = engine.store.snapshot();
    if let Err(e) = validate_against_store(&entries, &snapshot.store) {
        return JobStatus::Failed {
            error: e.to_string(),
        };
    }
    let pipeline = engine.pipeline(&snapshot.store);
    let result = run_eval_with_progress(
        &entries,
        &job.kinds,
        job.iterations,
        &pipeline,
        |done, total| {
            lock(jobs).insert(job.id.clone(), JobStatus::Running { done, total });
        },
    );
    match result {
        Ok(mut run) => {
            run.report
                .config
                .extra
                .insert("llm".into(), engine.llm_description.clone());
            run.report
                .config
                .extra
                .insert("store_generation".into(), snapshot.generation.clone());
            JobStatus::Done {
                report: Box::new(run.report),
            }
        }
        Err(e) => JobStatus::Failed {
            error: e.to_string(),
        },
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    trace_id: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            trace_id: None,
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("unknown {what} `{id}`"),
        )
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.message, "code": self.code});
        if let Some(t) = self.trace_id {
            body["trace_id"] = json!(t);
        }
        (self.status, Json(body)).into_response()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/traces/{id}", get(get_trace))
        .route("/api/eval/run", post(start_eval))
        .route("/api/eval/{job}", get(get_eval))
        .route("/api/store/reload", post(reload_store))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/api/health", get(health))
        .merge(api)
        .with_state(state)
}

async fn require_token(State(state): State<Shared>, req: Request, next: Next) -> Response {
    if let Some(expected) = &state.options.api_token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(expected.as_str()) {
            return ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or invalid bearer token",
            )
            .into_response();
        }
    }
    next.run(req).await
}

async fn health(State(state): State<Shared>) -> Json<serde_json::Value> {
    let snap = state.engine.store.snapshot();
    Json(json!({
        "status": "ok",
        "generation": snap.generation,
        "item_count": snap.store.len(),
        "embedder": snap.store.manifest().embedder,
        "default_retriever": state.engine.default_kind,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct CreateSessionRequest {
    pub history_window: Option<usize>,
}

async fn create_session(
    State(state): State<Shared>,
    body: Option<Json<CreateSessionRequest>>,
) -> (StatusCode, Json<serde_json::Value>) {
    state.evict_idle();
    let id = uuid::Uuid::new_v4().to_string();
    let mut session = ChatSession::new(id.clone());
    if let Some(w) = body.and_then(|Json(b)| b.history_window) {
        session.history_window = w;
    }
    let slot = SessionSlot {
        session: Arc::new(tokio::sync::Mutex::new(session)),
        last_used: Mutex::new(Instant::now()),
    };
    lock(&state.sessions).insert(id.clone(), Arc::new(slot));
    (StatusCode::CREATED, Json(json!({ "session_id": id })))
}

async fn get_session(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let slot = state.session(&id)?;
    let session = slot.session.lock().await;
    Ok(Json(json!({
        "session_id": session.id,
        "history_window": session.history_window,
        "turns": session.turns(),
    })))
}

#[derive(Debug, Deserialize)]
pub struct MessageRequest {
    pub text: String,
    #[serde(default)]
    pub retriever: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ContextEntry {
    pub id: String,
    pub score: f64,
    pub text: String,
    pub title: String,
    pub rank: usize,
    pub source_kind: SourceKind,
    pub chunk_index: usize,
    pub chunk_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageResponse {
    pub answer: String,
    pub trace_id: String,
    pub rewritten_query: String,
    pub was_rewritten: bool,
    pub retriever: RetrieverKind,
    pub context: Vec<ContextEntry>,
    pub timings: StepTimings,
}

impl From<&AnswerTrace> for MessageResponse {
    fn from(t: &AnswerTrace) -> Self {
        Self {
            answer: t.answer.clone(),
            trace_id: t.trace_id.clone(),
            rewritten_query: t.rewrite.enhanced_query.clone(),
            was_rewritten: t.rewrite.was_rewritten,
            retriever: t.retrieval.kind,
            context: t
                .retrieval
                .selected
                .iter()
                .map(|s| ContextEntry {
                    id: s.item.id.clone(),
                    score: s.score,
                    text: s.item.text.clone(),
                    title: s.item.title.clone(),
                    rank: s.rank,
                    source_kind: s.item.source_kind,
                    chunk_index: s.item.chunk_index,
                    chunk_count: s.item.chunk_count,
                })
                .collect(),
            timings: t.step_timings,
        }
    }
}

async fn post_message(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<MessageRequest>,
) -> Result<Json<MessageResponse>, ApiError> {
    let slot = state.session(&id)?;
    let kind = match body.retriever.as_deref().filter(|s| !s.is_empty()) {
        Some(s) => s
            .parse::<RetrieverKind>()
            .map_err(|e| ApiError::bad_request(e.to_string()))?,
        None => state.engine.default_kind,
    };
    let text = body.text.trim().to_string();
    if text.is_empty() {
        return Err(ApiError::bad_request("message text is empty"));
    }
    let mut guard = slot.session.clone().try_lock_owned().map_err(|_| {
        ApiError::new(
            StatusCode::CONFLICT,
            "turn_in_progress",
            "a message is already being answered in this session",
        )
    })?;

    let worker = state.clone();
    let trace = tokio::task::spawn_blocking(move || {
        let snapshot = worker.engine.store.snapshot();
        let pipeline = worker.engine.pipeline(&snapshot.store);
        let before = guard.turns().len();
        let trace = pipeline.chat_turn(&mut guard, &text, kind);
        worker.log_turns(&guard.id, &guard.turns()[before..]);
        trace
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
    .map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "pipeline_error",
            e.to_string(),
        )
    })?;

    let trace = Arc::new(trace);
    lock(&state.traces).insert(trace.clone());
    if let Some(failure) = &trace.error {
        let (status, code) = if failure.unavailable {
            (StatusCode::SERVICE_UNAVAILABLE, "llm_unavailable")
        } else {
            (StatusCode::BAD_GATEWAY, "llm_error")
        };
        let mut err = ApiError::new(status, code, failure.message.clone());
        err.trace_id = Some(trace.trace_id.clone());
        return Err(err);
    }
    Ok(Json(MessageResponse::from(trace.as_ref())))
}

async fn get_trace(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<AnswerTrace>, ApiError> {
    let trace = lock(&state.traces)
        .by_id
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("trace", &id))?;
    Ok(Json(trace.as_ref().clone()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct EvalRequest {
    pub kinds: Option<Vec<String>>,
    pub iterations: Option<usize>,
}

async fn start_eval(
    State(state): State<Shared>,
    body: Option<Json<EvalRequest>>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    if state.options.ground_truth.is_none() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "no_ground_truth",
            "no ground truth file is configured",
        ));
    }
    let kinds = match body.kinds {
        Some(ks) if !ks.is_empty() => ks
            .iter()
            .map(|k| k.parse::<RetrieverKind>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ApiError::bad_request(e.to_string()))?,
        _ => RetrieverKind::ALL.to_vec(),
    };
    let iterations = body.iterations.unwrap_or(state.options.eval_iterations);
    if iterations == 0 {
        return Err(ApiError::bad_request("iterations must be at least 1"));
    }
    let id = uuid::Uuid::new_v4().to_string();
    lock(&state.jobs).insert(id.clone(), JobStatus::Queued);
    lock(&state.eval_tx)
        .send(EvalJob {
            id: id.clone(),
            kinds,
            iterations,
        })
        .map_err(|_| {
            ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "eval_worker_down",
                "evaluation worker stopped",
            )
        })?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id }))))
}

async fn get_eval(
    State(state): State<Shared>,
    Path(job): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let status = lock(&state.jobs)
        .get(&job)
        .cloned()
        .ok_or_else(|| ApiError::not_found("evaluation job", &job))?;
    let mut body = serde_json::to_value(status).expect("job status serializes");
    body["job_id"] = json!(job);
    Ok(Json(body))
}

async fn reload_store(State(state): State<Shared>) -> Result<Json<serde_json::Value>, ApiError> {
    let engine = state.engine.clone();
    let (generation, item_count) = tokio::task::spawn_blocking(move || engine.reload())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, "reload_failed", e.to_string()))?;
    Ok(Json(
        json!({ "generation": generation, "item_count": item_count }),
    ))
}

/// Serves until Ctrl-C, sweeping idle sessions in the background.
pub async fn serve(state: Shared, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    let sweeper = state.clone();
    let period =
        (state.options.session_ttl / 2).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = sweeper.evict_idle();
            if n > 0 {
                tracing::info!(evicted = n, "idle sessions dropped");
            }
        }
    });
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
