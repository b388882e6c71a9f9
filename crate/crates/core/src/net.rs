//! Retry policy shared by the HTTP clients.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    #[serde(rename = "initial_backoff_ms", with = "millis")]
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_attempts: 1,
            initial_backoff: Duration::ZERO,
        }
    }

    pub fn backoff_before(&self, attempt: u32) -> Duration {
        // attempt is 1-based; no wait before the first one
        if attempt <= 1 {
            Duration::ZERO
        } else {
            self.initial_backoff
                .saturating_mul(1 << (attempt - 2).min(16))
        }
    }
}

/// Outcome of one attempt.
pub(crate) enum Attempt<T, E> {
    Done(T),
    Retry(E),
    Fail(E),
}

/// Runs `op` until it succeeds, fails permanently or the attempts run out.
/// Returns the result and the number of attempts made.
pub(crate) fn with_retries<T, E>(
    policy: &RetryPolicy,
    mut op: impl FnMut(u32) -> Attempt<T, E>,
) -> (Result<T, E>, u32) {
    let attempts = policy.max_attempts.max(1);
    let mut n = 1;
    loop {
        let wait = policy.backoff_before(n);
        if !wait.is_zero() {
            thread::sleep(wait);
        }
        match op(n) {
            Attempt::Done(v) => return (Ok(v), n),
            Attempt::Fail(e) => return (Err(e), n),
            Attempt::Retry(e) if n >= attempts => return (Err(e), n),
            Attempt::Retry(e) => {
                tracing::debug!(attempt = n, "retrying after transient failure");
                let _ = e;
                n += 1;
            }
        }
    }
}

pub(crate) mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}
