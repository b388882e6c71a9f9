//! Live-mode export fetcher: follows a paginated JSON endpoint.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::net::{with_retries, Attempt, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportKind {
    Messages,
    Replies,
    Pages,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteSource {
    pub base_url: String,
    #[serde(default)]
    pub auth_token: Option<String>,
    pub kind: ExportKind,
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, FetchError::Transport { .. })
    }
}

/// All items of a paginated export, in page order.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteExport {
    pub kind: ExportKind,
    pub items: Vec<Value>,
    /// HTTP requests issued, retries included.
    pub requests: u32,
}

impl RemoteExport {
    /// The items as one JSON array, the format the page loader reads.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.items).expect("json values serialize")
    }

    /// The items as CSV using `columns` as header. Item objects are looked up
    /// by column name; nested objects and arrays are written as JSON text.
    pub fn to_csv_bytes(&self, columns: &[&str]) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns).expect("in-memory write");
        for item in &self.items {
            let row = columns.iter().map(|c| match item.get(*c) {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => s.clone(),
                Some(other) => other.to_string(),
            });
            w.write_record(row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

#[derive(Deserialize)]
struct Page {
    items: Vec<Value>,
    #[serde(default)]
    next: Option<String>,
}

/// Fetches every page of `source`, following the `next` cursor until it is
/// absent. Transport failures and 5xx responses are retried per `policy`;
/// 401/403 fail immediately.
pub fn fetch_remote(
    source: &RemoteSource,
    policy: &RetryPolicy,
) -> Result<RemoteExport, FetchError> {
    let client = Client::builder()
        .timeout(Duration::from_secs(60))
        .build()
        .map_err(|e| FetchError::Protocol(e.to_string()))?;
    let mut items = Vec::new();
    let mut cursor: Option<String> = None;
    let mut requests = 0;
    loop {
        let (page, attempts) =
            with_retries(policy, |_| fetch_page(&client, source, cursor.as_deref()));
        requests += attempts;
        let page = page.map_err(|e| match e {
            FetchError::Transport { message, .. } => FetchError::Transport { attempts, message },
            other => other,
        })?;
        items.extend(page.items);
        match page.next {
            Some(next) if !next.is_empty() => cursor = Some(next),
            _ => break,
        }
    }
    Ok(RemoteExport {
        kind: source.kind,
        items,
        requests,
    })
}

fn fetch_page(
    client: &Client,
    source: &RemoteSource,
    cursor: Option<&str>,
) -> Attempt<Page, FetchError> {
    let mut req = client.get(&source.base_url);
    if let Some(c) = cursor {
        req = req.query(&[("cursor", c)]);
    }
    if let Some(token) = &source.auth_token {
        req = req.bearer_auth(token);
    }
    let transport = |message: String| FetchError::Transport {
        attempts: 0,
        message,
    };
    let resp = match req.send() {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(transport(e.to_string())),
    };
    let status = resp.status();
    if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
        return Attempt::Fail(FetchError::Auth(status.as_u16()));
    }
    if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
        return Attempt::Retry(transport(format!("HTTP {status}")));
    }
    if !status.is_success() {
        return Attempt::Fail(FetchError::Protocol(format!("unexpected HTTP {status}")));
    }
    let body = match resp.bytes() {
        Ok(b) => b,
        Err(e) => return Attempt::Retry(transport(e.to_string())),
    };
    match serde_json::from_slice::<Page>(&body) {
        Ok(page) => Attempt::Done(page),
        Err(e) => Attempt::Fail(FetchError::Protocol(format!("malformed page: {e}"))),
    }
}
