mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use common::{MockServer, Response};
use ragdesk_core::corpus::{Embedder, HttpEmbedder, HttpEmbedderConfig};
use ragdesk_core::llm::{
    HttpLanguageModel, LanguageModel, LlmEndpointSpec, LlmError, PromptDialect,
};
use ragdesk_core::net::RetryPolicy;
use serde_json::json;

fn fast_retries() -> RetryPolicy {
    RetryPolicy {
        max_attempts: 3,
        initial_backoff: Duration::from_millis(5),
    }
}

fn spec(url: &str) -> LlmEndpointSpec {
    LlmEndpointSpec {
        base_url: url.to_string(),
        model_name: "test-model".into(),
        temperature: 0.0,
        max_tokens: 256,
        timeout_secs: 5.0,
        prompt_dialect: PromptDialect::Llama2Inst,
        auth_token: Some("secret".into()),
        max_concurrent: 4,
    }
}

#[test]
fn completion_wire_contract() {
    let server = MockServer::start(|req, _| {
        let body = req.json();
        Response::json(
            200,
            json!({"text": format!("echo: {}", body["prompt"].as_str().unwrap())}),
        )
    });
    let llm = HttpLanguageModel::new(spec(&format!("{}/", server.url)), fast_retries()).unwrap();
    assert_eq!(llm.complete("hi").unwrap(), "echo: hi");
    let req = &server.requests()[0];
    assert_eq!(req.method, "POST");
    assert_eq!(req.target, "/completions");
    assert_eq!(req.header("authorization"), Some("Bearer secret"));
    assert_eq!(
        req.json(),
        json!({"model": "test-model", "prompt": "hi", "temperature": 0.0, "max_tokens": 256})
    );
}

#[test]
fn retries_server_errors_but_not_auth() {
    let flaky = MockServer::start(|_, seq| {
        if seq == 0 {
            Response::json(503, json!({}))
        } else {
            Response::json(200, json!({"text": "ok"}))
        }
    });
    let llm = HttpLanguageModel::new(spec(&flaky.url), fast_retries()).unwrap();
    assert_eq!(llm.complete("x").unwrap(), "ok");
    assert_eq!(flaky.requests().len(), 2);

    let denied = MockServer::start(|_, _| Response::json(403, json!({})));
    let llm = HttpLanguageModel::new(spec(&denied.url), fast_retries()).unwrap();
    assert_eq!(llm.complete("x").unwrap_err(), LlmError::Auth(403));
    assert_eq!(denied.requests().len(), 1);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let llm = HttpLanguageModel::new(spec(&common::dead_url()), fast_retries()).unwrap();
    let err = llm.complete("x").unwrap_err();
    assert!(err.is_unavailable());
    assert!(matches!(err, LlmError::Transport { attempts: 3, .. }));
}

#[test]
fn concurrency_is_capped() {
    let in_flight = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let (f, p) = (in_flight.clone(), peak.clone());
    let server = MockServer::start(move |_, _| {
        let now = f.fetch_add(1, Ordering::SeqCst) + 1;
        p.fetch_max(now, Ordering::SeqCst);
        thread::sleep(Duration::from_millis(40));
        f.fetch_sub(1, Ordering::SeqCst);
        Response::json(200, json!({"text": "ok"}))
    });
    let llm = Arc::new(
        HttpLanguageModel::new(
            LlmEndpointSpec {
                max_concurrent: 2,
                ..spec(&server.url)
            },
            fast_retries(),
        )
        .unwrap(),
    );
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let llm = llm.clone();
            thread::spawn(move || llm.complete("x").unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(server.requests().len(), 6);
    assert!(peak.load(Ordering::SeqCst) <= 2);
}

#[test]
fn invalid_spec_is_rejected() {
    assert!(HttpLanguageModel::new(
        LlmEndpointSpec {
            timeout_secs: 0.0,
            ..spec("http://x")
        },
        fast_retries()
    )
    .is_err());
}

#[test]
fn http_embedder_contract() {
    let server = MockServer::start(|req, _| {
        let body = req.json();
        let n = body["input"].as_str().unwrap().len() as f64;
        Response::json(200, json!({"embedding": [n, 1.0, 0.0]}))
    });
    let cfg = HttpEmbedderConfig {
        base_url: server.url.clone(),
        model: "bge".into(),
        dimension: 3,
        auth_token: None,
        timeout_secs: 5,
    };
    let e = HttpEmbedder::new(cfg.clone(), fast_retries()).unwrap();
    let v = Embedder::<f64>::embed(&e, "abcd").unwrap();
    assert_eq!(v.values(), &[4.0, 1.0, 0.0]);
    assert_eq!(Embedder::<f64>::spec(&e).0, "http:bge/3");
    assert_eq!(server.requests()[0].target, "/embeddings");
    assert_eq!(server.requests()[0].json()["model"], "bge");

    let wrong = HttpEmbedder::new(
        HttpEmbedderConfig {
            dimension: 4,
            ..cfg
        },
        fast_retries(),
    )
    .unwrap();
    assert!(Embedder::<f64>::embed(&wrong, "abcd").is_err());
}
