use std::sync::{Condvar, Mutex};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{LanguageModel, LlmError, PromptDialect};
use crate::net::{with_retries, Attempt, RetryPolicy};

/// Where and how to reach a completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEndpointSpec {
    pub base_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub prompt_dialect: PromptDialect,
    #[serde(default)]
    pub auth_token: Option<String>,
    /// Upper bound on requests in flight through one client.
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
}

fn default_max_tokens() -> u32 {
    512
}
fn default_timeout_secs() -> f64 {
    120.0
}
fn default_max_concurrent() -> usize {
    4
}

impl LlmEndpointSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err("llm timeout must be positive".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err("llm temperature must be non-negative".into());
        }
        if self.max_concurrent == 0 {
            return Err("llm max_concurrent must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Counting semaphore.
struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|p| p.into_inner());
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap_or_else(|p| p.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|p| p.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Client for `POST {base_url}/completions` taking
/// `{model, prompt, temperature, max_tokens}` and returning `{text}`.
pub struct HttpLanguageModel {
    spec: LlmEndpointSpec,
    client: Client,
    retry: RetryPolicy,
    limiter: Limiter,
}

impl HttpLanguageModel {
    pub fn new(spec: LlmEndpointSpec, retry: RetryPolicy) -> Result<Self, LlmError> {
        spec.validate().map_err(LlmError::Protocol)?;
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(spec.timeout_secs))
            .build()
            .map_err(|e| LlmError::Protocol(e.to_string()))?;
        let limiter = Limiter {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            cap: spec.max_concurrent,
        };
        Ok(Self {
            spec,
            client,
            retry,
            limiter,
        })
    }

    pub fn spec(&self) -> &LlmEndpointSpec {
        &self.spec
    }
}

impl LanguageModel for HttpLanguageModel {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let _permit = self.limiter.acquire();
        let url = format!("{}/completions", self.spec.base_url.trim_end_matches('/'));
        let body = CompletionRequest {
            model: &self.spec.model_name,
            prompt,
            temperature: self.spec.temperature,
            max_tokens: self.spec.max_tokens,
        };
        let transport = |message: String| LlmError::Transport {
            attempts: 0,
            message,
        };
        let (result, attempts) = with_retries(&self.retry, |_| {
            let mut req = self.client.post(&url).json(&body);
            if let Some(t) = &self.spec.auth_token {
                req = req.bearer_auth(t);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => return Attempt::Retry(transport(e.to_string())),
            };
            let status = resp.status();
            if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
                return Attempt::Fail(LlmError::Auth(status.as_u16()));
            }
            if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
                return Attempt::Retry(transport(format!("HTTP {status}")));
            }
            if !status.is_success() {
                return Attempt::Fail(LlmError::Protocol(format!("unexpected HTTP {status}")));
            }
            match resp.json::<CompletionResponse>() {
                Ok(r) => Attempt::Done(r.text),
                Err(e) => Attempt::Fail(LlmError::Protocol(e.to_string())),
            }
        });
        result.map_err(|e| match e {
            LlmError::Transport { message, .. } => LlmError::Transport { attempts, message },
            other => other,
        })
    }
}
