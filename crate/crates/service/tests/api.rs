mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use common::Workspace;
use http_body_util::BodyExt;
use ragdesk::engine::{build_embedder, Engine};
use ragdesk::server::{router, AppState, ServerOptions};
use ragdesk_core::corpus::GenerationRoot;
use ragdesk_core::llm::{
    LanguageModel, LlmError, ScriptedModel, ScriptedModelFile, UnreachableModel,
};
use ragdesk_core::retrieval::RetrievalConfig;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(engine: Engine, options: ServerOptions) -> Router {
    router(AppState::new(Arc::new(engine), options).unwrap())
}

fn options(ws: &Workspace) -> ServerOptions {
    ServerOptions::from_config(&ws.config())
}

/// Engine over the workspace store with `llm` answering every prompt.
fn engine_with(ws: &Workspace, llm: Arc<dyn LanguageModel>) -> Engine {
    let cfg = ws.config();
    let loaded = GenerationRoot::new(&cfg.store_dir)
        .load_current::<f64>()
        .unwrap();
    let retrieval = RetrievalConfig {
        k: 2,
        similarity_threshold: 0.0,
        ..Default::default()
    };
    Engine::in_memory(
        loaded.store,
        build_embedder(&cfg.embedder).unwrap(),
        llm,
        retrieval,
    )
}

fn scripted() -> Arc<dyn LanguageModel> {
    let file: ScriptedModelFile = serde_json::from_str(common::SCRIPT).unwrap();
    Arc::new(ScriptedModel::new(file))
}

async fn call_with(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
    token: Option<&str>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    call_with(app, method, uri, body, None).await
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["session_id"].as_str().unwrap().to_string()
}

fn built() -> Workspace {
    let ws = Workspace::new();
    ws.build();
    ws
}

#[tokio::test]
async fn message_returns_answer_and_context() {
    let ws = built();
    let app = app(Engine::from_config(&ws.config()).unwrap(), options(&ws));
    let sid = new_session(&app).await;

    let uri = format!("/api/sessions/{sid}/messages");
    let (status, body) = call(
        &app,
        Method::POST,
        &uri,
        Some(json!({"text": "How do I reset my VPN token?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(body["answer"]
        .as_str()
        .unwrap()
        .starts_with("From the docs: "));
    assert_eq!(body["trace_id"], format!("{sid}.1"));
    assert_eq!(body["retriever"], "bm25");
    assert_eq!(body["was_rewritten"], false);
    let context = body["context"].as_array().unwrap();
    assert!(!context.is_empty() && context.len() <= 2);
    assert!(context.iter().any(|c| c["id"] == "m1:0"));
    for c in context {
        for field in ["id", "score", "text", "title", "rank"] {
            assert!(!c[field].is_null(), "{field} missing in {c}");
        }
    }
    for step in ["rewrite", "retrieve", "prompt", "generate"] {
        assert!(body["timings"][step].as_f64().unwrap() > 0.0);
    }

    let (status, body2) = call(
        &app,
        Method::POST,
        &uri,
        Some(json!({"text": "And staging?", "retriever": "ensemble"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body2}");
    assert_eq!(body2["trace_id"], format!("{sid}.2"));
    assert_eq!(body2["retriever"], "ensemble");

    let (status, trace) = call(&app, Method::GET, &format!("/api/traces/{sid}.1"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(trace["original_query"], "How do I reset my VPN token?");
    assert!(trace["final_prompt"]
        .as_str()
        .unwrap()
        .contains("--- Context item 1 ---"));

    let (status, session) = call(&app, Method::GET, &format!("/api/sessions/{sid}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let turns = session["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 4);
    assert_eq!(turns[0]["role"], "user");
    assert_eq!(turns[1]["trace_id"], format!("{sid}.1"));
}

#[tokio::test]
async fn health_reports_store() {
    let ws = built();
    let mut opts = options(&ws);
    opts.api_token = Some("secret".into());
    let app = app(Engine::from_config(&ws.config()).unwrap(), opts);
    let (status, body) = call(&app, Method::GET, "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["item_count"], 5);
    assert!(!body["generation"].as_str().unwrap().is_empty());
}

#[tokio::test]
async fn token_guards_everything_but_health() {
    let ws = built();
    let mut opts = options(&ws);
    opts.api_token = Some("secret".into());
    let app = app(Engine::from_config(&ws.config()).unwrap(), opts);
    let (status, body) = call(&app, Method::POST, "/api/sessions", None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["code"], "unauthorized");
    let (status, _) = call_with(&app, Method::POST, "/api/sessions", None, Some("wrong")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call_with(&app, Method::POST, "/api/sessions", None, Some("secret")).await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let ws = built();
    let app = app(Engine::from_config(&ws.config()).unwrap(), options(&ws));
    for (method, uri, body) in [
        (
            Method::POST,
            "/api/sessions/nope/messages",
            Some(json!({"text": "hi"})),
        ),
        (Method::GET, "/api/sessions/nope", None),
        (Method::GET, "/api/traces/nope.1", None),
        (Method::GET, "/api/eval/nope", None),
    ] {
        let (status, body) = call(&app, method, uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(body["code"], "not_found");
        assert!(body["error"].as_str().unwrap().contains("nope"));
    }
}

#[tokio::test]
async fn bad_requests_are_400() {
    let ws = built();
    let app = app(Engine::from_config(&ws.config()).unwrap(), options(&ws));
    let sid = new_session(&app).await;
    let uri = format!("/api/sessions/{sid}/messages");
    let (status, body) = call(
        &app,
        Method::POST,
        &uri,
        Some(json!({"text": "hi", "retriever": "magic"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("magic"));
    let (status, _) = call(&app, Method::POST, &uri, Some(json!({"text": "   "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        Method::POST,
        "/api/eval/run",
        Some(json!({"kinds": ["magic"]})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        Method::POST,
        "/api/eval/run",
        Some(json!({"iterations": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

/// Blocks every completion until the gate opens.
struct GatedModel {
    inner: Arc<dyn LanguageModel>,
    entered: AtomicBool,
    open: Mutex<bool>,
    cv: Condvar,
}

impl GatedModel {
    fn release(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }
}

impl LanguageModel for GatedModel {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.entered.store(true, Ordering::SeqCst);
        let mut open = self.open.lock().unwrap();
        while !*open {
            open = self.cv.wait(open).unwrap();
        }
        drop(open);
        self.inner.complete(prompt)
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_message_in_same_session_is_409() {
    let ws = built();
    let gated = Arc::new(GatedModel {
        inner: scripted(),
        entered: AtomicBool::new(false),
        open: Mutex::new(false),
        cv: Condvar::new(),
    });
    let app = app(engine_with(&ws, gated.clone()), options(&ws));
    let sid = new_session(&app).await;
    let other = new_session(&app).await;
    let uri = format!("/api/sessions/{sid}/messages");

    let first = {
        let app = app.clone();
        let uri = uri.clone();
        tokio::spawn(async move {
            call(
                &app,
                Method::POST,
                &uri,
                Some(json!({"text": "How do I reset my VPN token?"})),
            )
            .await
        })
    };
    while !gated.entered.load(Ordering::SeqCst) {
        tokio::time::sleep(Duration::from_millis(2)).await;
    }
    let (status, body) = call(&app, Method::POST, &uri, Some(json!({"text": "second"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "turn_in_progress");

    // another session is not blocked by the busy one
    let second = {
        let app = app.clone();
        let uri = format!("/api/sessions/{other}/messages");
        tokio::spawn(async move {
            call(
                &app,
                Method::POST,
                &uri,
                Some(json!({"text": "Java version?"})),
            )
            .await
        })
    };
    gated.release();
    let (status, body) = first.await.unwrap();
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["trace_id"], format!("{sid}.1"));
    assert_eq!(second.await.unwrap().0, StatusCode::OK);

    let (_, session) = call(&app, Method::GET, &format!("/api/sessions/{sid}"), None).await;
    assert_eq!(session["turns"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn llm_outage_is_503_with_stored_trace() {
    let ws = built();
    let app = app(engine_with(&ws, Arc::new(UnreachableModel)), options(&ws));
    let sid = new_session(&app).await;
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/api/sessions/{sid}/messages"),
        Some(json!({"text": "How do I reset my VPN token?"})),
    )
    .await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["code"], "llm_unavailable");
    let trace_id = body["trace_id"].as_str().unwrap();

    let (status, trace) = call(&app, Method::GET, &format!("/api/traces/{trace_id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(trace["error"]["unavailable"], true);
    // rewriting failed open and retrieval still ran
    assert_eq!(trace["rewrite"]["was_rewritten"], false);
    assert!(!trace["retrieval"]["selected"]
        .as_array()
        .unwrap()
        .is_empty());

    let (_, session) = call(&app, Method::GET, &format!("/api/sessions/{sid}"), None).await;
    let turns = session["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 2);
    assert_eq!(turns[1]["role"], "assistant");
    assert_eq!(
        turns[1]["text"],
        ragdesk_core::dialogue::GENERATION_FAILED_NOTICE
    );
}

#[tokio::test]
async fn eval_job_runs_in_background() {
    let ws = built();
    let app = app(Engine::from_config(&ws.config()).unwrap(), options(&ws));
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/eval/run",
        Some(json!({"kinds": ["bm25", "tfidf"], "iterations": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = body["job_id"].as_str().unwrap().to_string();

    let mut last = Value::Null;
    for _ in 0..500 {
        let (status, body) = call(&app, Method::GET, &format!("/api/eval/{job}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if body["status"] == "done" || body["status"] == "failed" {
            last = body;
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(last["status"], "done", "{last}");
    assert_eq!(last["job_id"], job.as_str());
    let summaries = last["report"]["summaries"].as_array().unwrap();
    assert_eq!(summaries.len(), 2);
    assert_eq!(last["report"]["entry_count"], 3);
}

#[tokio::test]
async fn eval_without_ground_truth_is_rejected() {
    let ws = built();
    let mut opts = options(&ws);
    opts.ground_truth = None;
    let app = app(Engine::from_config(&ws.config()).unwrap(), opts);
    let (status, body) = call(&app, Method::POST, "/api/eval/run", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "no_ground_truth");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn reload_swaps_generation_under_load() {
    let ws = built();
    let cfg = ws.config();
    let app = app(Engine::from_config(&cfg).unwrap(), options(&ws));
    let (_, before) = call(&app, Method::GET, "/api/health", None).await;

    let mut sessions = Vec::new();
    for _ in 0..20 {
        sessions.push(new_session(&app).await);
    }
    ragdesk::commands::index(&cfg).unwrap();

    let mut tasks = Vec::new();
    for sid in &sessions {
        let app = app.clone();
        let uri = format!("/api/sessions/{sid}/messages");
        tasks.push(tokio::spawn(async move {
            call(
                &app,
                Method::POST,
                &uri,
                Some(json!({"text": "Why is the staging database read only?"})),
            )
            .await
        }));
    }
    let (status, reload) = call(&app, Method::POST, "/api/store/reload", None).await;
    assert_eq!(status, StatusCode::OK, "{reload}");
    assert_eq!(reload["item_count"], 5);
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK, "{body}");
        assert!(body["context"]
            .as_array()
            .unwrap()
            .iter()
            .any(|c| c["id"] == "m2:0"));
    }
    let (_, after) = call(&app, Method::GET, "/api/health", None).await;
    assert_ne!(before["generation"], after["generation"]);
    assert_eq!(after["generation"], reload["generation"]);
}

#[tokio::test]
async fn reload_without_generations_is_409() {
    let ws = built();
    let app = app(engine_with(&ws, scripted()), options(&ws));
    let (status, body) = call(&app, Method::POST, "/api/store/reload", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "reload_failed");
}

#[tokio::test]
async fn idle_sessions_expire() {
    let ws = built();
    let mut opts = options(&ws);
    opts.session_ttl = Duration::from_millis(20);
    let state = AppState::new(Arc::new(Engine::from_config(&ws.config()).unwrap()), opts).unwrap();
    let app = router(state.clone());
    let a = new_session(&app).await;
    let _b = new_session(&app).await;
    tokio::time::sleep(Duration::from_millis(40)).await;
    let (status, _) = call(&app, Method::GET, &format!("/api/sessions/{a}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(state.evict_idle(), 1);
}

#[tokio::test]
async fn session_log_appends_turns() {
    let ws = built();
    let log = ws.path().join("logs/sessions.jsonl");
    let mut opts = options(&ws);
    opts.session_log = Some(log.clone());
    let app = app(Engine::from_config(&ws.config()).unwrap(), opts);
    let sid = new_session(&app).await;
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/api/sessions/{sid}/messages"),
        Some(json!({"text": "Java version?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["session_id"], sid.as_str());
    assert_eq!(lines[0]["role"], "user");
    assert_eq!(lines[1]["trace_id"], format!("{sid}.1"));
}

#[tokio::test]
async fn trace_cache_is_bounded() {
    let ws = built();
    let mut opts = options(&ws);
    opts.trace_capacity = 2;
    let app = app(Engine::from_config(&ws.config()).unwrap(), opts);
    let sid = new_session(&app).await;
    for q in ["one?", "two?", "three?"] {
        let (status, _) = call(
            &app,
            Method::POST,
            &format!("/api/sessions/{sid}/messages"),
            Some(json!({"text": q})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    assert_eq!(
        call(&app, Method::GET, &format!("/api/traces/{sid}.1"), None)
            .await
            .0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&app, Method::GET, &format!("/api/traces/{sid}.3"), None)
            .await
            .0,
        StatusCode::OK
    );
}
