//! Error classification, retry with backoff, and the JSON-over-HTTP client
//! shared by hosted backends.

use std::thread;
use std::time::Duration;

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying: timeouts, connection errors, rate limits, 5xx.
    #[error("transient backend error: {0}")]
    Transient(String),
    /// Not worth retrying: bad credentials, bad request, bad configuration.
    #[error("backend error: {0}")]
    Fatal(String),
    #[error("unparseable response: {reason}")]
    Unparseable { reason: String, raw: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(1))
    }
}

/// Every attempt failed with a retryable error.
#[derive(Debug, Clone, PartialEq)]
pub struct Exhausted {
    pub attempts: u32,
    pub last: BackendError,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RetryResult<T> {
    Done { value: T, attempts: u32 },
    Exhausted(Exhausted),
    Fatal { error: BackendError, attempts: u32 },
}

/// Calls `f` until it succeeds, fails fatally, or the policy runs out,
/// sleeping with exponential backoff between attempts.
pub fn with_retry<T>(
    policy: &RetryPolicy,
    mut f: impl FnMut() -> Result<T, BackendError>,
) -> RetryResult<T> {
    let attempts = policy.attempts.max(1);
    let mut n = 0;
    loop {
        n += 1;
        match f() {
            Ok(value) => return RetryResult::Done { value, attempts: n },
            Err(error @ BackendError::Fatal(_)) => return RetryResult::Fatal { error, attempts: n },
            Err(e) if n >= attempts => {
                return RetryResult::Exhausted(Exhausted {
                    attempts: n,
                    last: e,
                })
            }
            Err(e) => {
                log::warn!("attempt {n} failed: {e}; retrying");
                let d = policy.delay(n);
                if !d.is_zero() {
                    thread::sleep(d);
                }
            }
        }
    }
}

/// Reads an API key from the named environment variable; empty counts as
/// unset.
pub fn api_key_from_env(var: &str) -> Option<String> {
    std::env::var(var).ok().filter(|k| !k.trim().is_empty())
}

/// POSTs JSON and returns the parsed JSON reply.
pub struct JsonClient {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl JsonClient {
    pub fn new(url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: url.into(),
            api_key,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| BackendError::Transient(format!("{}: {e}", self.url)))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transient(format!("reading response: {e}")))?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| BackendError::Unparseable {
                reason: format!("response body is not JSON: {e}"),
                raw: text,
            }),
            408 | 409 | 429 | 500..=599 => {
                Err(BackendError::Transient(format!("HTTP {status}: {}", snippet(&text))))
            }
            _ => Err(BackendError::Fatal(format!("HTTP {status}: {}", snippet(&text)))),
        }
    }
}

fn snippet(text: &str) -> String {
    let t: String = text.chars().take(200).collect();
    t.replace('\n', " ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retry_stops_on_fatal_and_exhausts_on_transient() {
        let policy = RetryPolicy {
            attempts: 3,
            base_delay: Duration::ZERO,
        };
        let mut calls = 0;
        let r: RetryResult<()> = with_retry(&policy, || {
            calls += 1;
            Err(BackendError::Transient("timeout".into()))
        });
        assert_eq!(calls, 3);
        assert!(matches!(r, RetryResult::Exhausted(Exhausted { attempts: 3, .. })));

        let mut calls = 0;
        let r: RetryResult<()> = with_retry(&policy, || {
            calls += 1;
            Err(BackendError::Fatal("401".into()))
        });
        assert_eq!(calls, 1);
        assert!(matches!(r, RetryResult::Fatal { attempts: 1, .. }));

        let mut calls = 0;
        let r = with_retry(&policy, || {
            calls += 1;
            if calls < 2 {
                Err(BackendError::Transient("x".into()))
            } else {
                Ok(5)
            }
        });
        assert_eq!(r, RetryResult::Done { value: 5, attempts: 2 });
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_millis(500));
        assert_eq!(p.delay(3), Duration::from_millis(2000));
    }
}
