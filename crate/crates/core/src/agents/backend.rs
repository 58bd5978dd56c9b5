use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Format(String),
    #[error("replay transcript exhausted")]
    ReplayExhausted,
}

impl BackendError {
    /// Errors worth another attempt: network trouble, rate limits, 5xx.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Http { status, .. } => *status == 429 || *status >= 500,
            BackendError::Format(_) | BackendError::ReplayExhausted => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self { temperature: 0.0 }
    }
}

/// A chat model: one system message plus one user message in, text out.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, system: &str, user: &str, params: &DecodingParams) -> Result<String, BackendError>;

    /// Model name reported in transcripts.
    fn identity(&self) -> String;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, system: &str, user: &str, params: &DecodingParams) -> Result<String, BackendError> {
        (**self).complete(system, user, params)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub retries: u32,
    /// Delay before the first retry; doubles each attempt.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay_ms: 500,
        }
    }
}

/// Calls the backend, retrying retryable failures with exponential backoff.
pub fn complete_with_retry(
    backend: &dyn ChatBackend,
    system: &str,
    user: &str,
    params: &DecodingParams,
    policy: &RetryPolicy,
) -> Result<String, BackendError> {
    let mut attempt = 0;
    loop {
        match backend.complete(system, user, params) {
            Ok(text) => return Ok(text),
            Err(err) if err.is_retryable() && attempt < policy.retries => {
                let delay = Duration::from_millis(policy.base_delay_ms.saturating_mul(1 << attempt));
                log::warn!(
                    "backend call failed (attempt {}/{}): {err}; retrying in {:?}",
                    attempt + 1,
                    policy.retries + 1,
                    delay
                );
                std::thread::sleep(delay);
                attempt += 1;
            }
            Err(err) => return Err(err),
        }
    }
}

/// One prompt/response exchange, as stored in a JSON-lines transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub model: String,
    pub system: String,
    pub user: String,
    pub response: String,
}

/// Wraps a backend and keeps every successful exchange, optionally
/// appending each one to a JSON-lines file as it happens.
pub struct RecordingBackend<B> {
    inner: B,
    entries: Mutex<Vec<TranscriptEntry>>,
    sink: Option<Mutex<File>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            entries: Mutex::new(Vec::new()),
            sink: None,
        }
    }

    pub fn with_log_file(inner: B, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            entries: Mutex::new(Vec::new()),
            sink: Some(Mutex::new(file)),
        })
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript lock").clone()
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, system: &str, user: &str, params: &DecodingParams) -> Result<String, BackendError> {
        let response = self.inner.complete(system, user, params)?;
        let entry = TranscriptEntry {
            model: self.inner.identity(),
            system: system.to_string(),
            user: user.to_string(),
            response: response.clone(),
        };
        if let Some(sink) = &self.sink {
            let line = serde_json::to_string(&entry).expect("transcript entry serializes");
            let mut file = sink.lock().expect("transcript file lock");
            if let Err(err) = writeln!(file, "{line}") {
                log::warn!("could not append to transcript log: {err}");
            }
        }
        self.entries.lock().expect("transcript lock").push(entry);
        Ok(response)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

/// Answers from a recorded transcript, in order.
pub struct ReplayBackend {
    model: String,
    queue: Mutex<VecDeque<TranscriptEntry>>,
}

impl ReplayBackend {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        let model = entries
            .first()
            .map_or_else(|| "replay".to_string(), |e| e.model.clone());
        Self {
            model,
            queue: Mutex::new(entries.into()),
        }
    }

    pub fn from_jsonl(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str(&line).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?,
            );
        }
        Ok(Self::new(entries))
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, _system: &str, _user: &str, _params: &DecodingParams) -> Result<String, BackendError> {
        self.queue
            .lock()
            .expect("replay lock")
            .pop_front()
            .map(|e| e.response)
            .ok_or(BackendError::ReplayExhausted)
    }

    fn identity(&self) -> String {
        self.model.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
        error: BackendError,
    }

    impl ChatBackend for Flaky {
        fn complete(&self, _: &str, _: &str, _: &DecodingParams) -> Result<String, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(self.error.clone())
            } else {
                Ok("ok".into())
            }
        }

        fn identity(&self) -> String {
            "flaky".into()
        }
    }

    const FAST: RetryPolicy = RetryPolicy {
        retries: 3,
        base_delay_ms: 1,
    };

    #[test]
    fn transient_failures_are_retried() {
        let b = Flaky {
            failures: 2,
            calls: AtomicU32::new(0),
            error: BackendError::Transport("reset".into()),
        };
        assert_eq!(complete_with_retry(&b, "s", "u", &DecodingParams::default(), &FAST).unwrap(), "ok");
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retries_run_out() {
        let b = Flaky {
            failures: 10,
            calls: AtomicU32::new(0),
            error: BackendError::Http {
                status: 503,
                body: String::new(),
            },
        };
        assert!(complete_with_retry(&b, "s", "u", &DecodingParams::default(), &FAST).is_err());
        assert_eq!(b.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let b = Flaky {
            failures: 10,
            calls: AtomicU32::new(0),
            error: BackendError::Http {
                status: 401,
                body: "bad key".into(),
            },
        };
        assert!(complete_with_retry(&b, "s", "u", &DecodingParams::default(), &FAST).is_err());
        assert_eq!(b.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn recorded_transcript_replays() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let rec = RecordingBackend::with_log_file(
            Flaky {
                failures: 0,
                calls: AtomicU32::new(0),
                error: BackendError::Transport(String::new()),
            },
            &path,
        )
        .unwrap();
        rec.complete("sys", "one", &DecodingParams::default()).unwrap();
        rec.complete("sys", "two", &DecodingParams::default()).unwrap();
        assert_eq!(rec.entries().len(), 2);

        let replay = ReplayBackend::from_jsonl(&path).unwrap();
        assert_eq!(replay.identity(), "flaky");
        assert_eq!(replay.complete("", "", &DecodingParams::default()).unwrap(), "ok");
        assert_eq!(replay.complete("", "", &DecodingParams::default()).unwrap(), "ok");
        assert_eq!(
            replay.complete("", "", &DecodingParams::default()),
            Err(BackendError::ReplayExhausted)
        );
    }
}
