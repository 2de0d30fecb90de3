//! Uniform access to chat-completion endpoints.
//!
//! Remote endpoints speak the OpenAI-compatible `POST {base_url}/chat/completions`
//! schema. Mock endpoints answer from a [`MockScript`] and never touch the
//! network, which keeps every pipeline in this crate reproducible offline.

mod mock;
mod remote;
mod types;
mod validated;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::*;
pub use types::*;
pub use validated::*;

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid endpoint configuration: {0}")]
    InvalidEndpoint(String),
    #[error("endpoint `{endpoint_id}` needs environment variable {variable}, which is not set")]
    MissingAuth { endpoint_id: String, variable: String },
    #[error("no mock script registered for endpoint `{0}`")]
    UnknownMock(String),
    #[error("endpoint `{endpoint_id}` failed after {attempts} attempt(s) (last status {}): {message}", last_status.map(|s| s.to_string()).unwrap_or_else(|| "none".into()))]
    Exhausted {
        endpoint_id: String,
        attempts: u32,
        last_status: Option<u16>,
        message: String,
    },
    #[error("every request in the batch failed: {}", summarize(.failures))]
    BatchFailed { failures: Vec<(usize, String)> },
}

fn summarize(failures: &[(usize, String)]) -> String {
    failures
        .iter()
        .map(|(i, e)| format!("[{i}] {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl GatewayError {
    /// Configuration problems are fatal and never retried.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            GatewayError::MissingAuth { .. } | GatewayError::InvalidEndpoint(_) | GatewayError::UnknownMock(_)
        )
    }
}

/// One attempted call. Retries produce one entry each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallLogEntry {
    pub seq: u64,
    pub endpoint_id: String,
    pub request_tag: String,
    pub fingerprint: String,
    pub attempt: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
}

#[derive(Default)]
struct CallLog {
    entries: Vec<CallLogEntry>,
    file: Option<File>,
}

/// Outcome of one attempt, before retry handling.
pub(crate) enum AttemptError {
    /// Worth retrying (429, 5xx, transport).
    Transient { status: Option<u16>, message: String },
    Permanent { status: Option<u16>, message: String },
}

pub struct Gateway {
    mocks: RwLock<BTreeMap<String, Arc<MockScript>>>,
    log: Mutex<CallLog>,
    requests_by_tag: Mutex<BTreeMap<String, usize>>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    sleep: bool,
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new()
    }
}

impl Gateway {
    pub fn new() -> Self {
        Self {
            mocks: RwLock::new(BTreeMap::new()),
            log: Mutex::new(CallLog::default()),
            requests_by_tag: Mutex::new(BTreeMap::new()),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            sleep: true,
        }
    }

    /// Skip real backoff sleeps (tests against local servers).
    pub fn without_backoff_sleep(mut self) -> Self {
        self.sleep = false;
        self
    }

    /// Also append every call-log entry to a JSONL file.
    pub fn with_log_file(self, path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.log.lock().expect("log lock").file = Some(file);
        Ok(self)
    }

    /// Register `script` and return a mock endpoint that answers from it.
    pub fn configure_mock(&self, endpoint_id: &str, script: MockScript) -> EndpointConfig {
        self.mocks
            .write()
            .expect("mock registry lock")
            .insert(endpoint_id.to_string(), Arc::new(script));
        EndpointConfig {
            endpoint_id: endpoint_id.to_string(),
            base_url: String::new(),
            model_name: format!("mock:{endpoint_id}"),
            auth_env: None,
            max_parallel: 4,
            retry: RetryPolicy { max_attempts: 3, base_backoff_ms: 0 },
            kind: EndpointKind::Mock,
            timeout_ms: 0,
        }
    }

    pub fn call_log(&self) -> Vec<CallLogEntry> {
        self.log.lock().expect("log lock").entries.clone()
    }

    /// Logical requests (not attempts) whose tag starts with `prefix`.
    pub fn requests_with_tag_prefix(&self, prefix: &str) -> usize {
        self.requests_by_tag
            .lock()
            .expect("tag lock")
            .iter()
            .filter(|(tag, _)| tag.starts_with(prefix))
            .map(|(_, n)| *n)
            .sum()
    }

    pub fn total_requests(&self) -> usize {
        self.requests_with_tag_prefix("")
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    /// Fail early if the endpoint cannot possibly be called.
    pub fn check_endpoint(&self, endpoint: &EndpointConfig) -> Result<(), GatewayError> {
        endpoint.validate().map_err(GatewayError::InvalidEndpoint)?;
        match endpoint.kind {
            EndpointKind::Mock => {
                if !self.mocks.read().expect("mock registry lock").contains_key(&endpoint.endpoint_id) {
                    return Err(GatewayError::UnknownMock(endpoint.endpoint_id.clone()));
                }
            }
            EndpointKind::Remote => {
                remote::auth_token(endpoint)?;
            }
        }
        Ok(())
    }

    /// Blocking completion with retries on transient failures.
    pub fn complete(&self, request: &ChatRequest, endpoint: &EndpointConfig) -> Result<ChatResponse, GatewayError> {
        request.validate().map_err(GatewayError::InvalidRequest)?;
        self.check_endpoint(endpoint)?;
        *self
            .requests_by_tag
            .lock()
            .expect("tag lock")
            .entry(request.request_tag.clone())
            .or_default() += 1;

        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        let result = self.complete_with_retries(request, endpoint);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }

    fn complete_with_retries(&self, request: &ChatRequest, endpoint: &EndpointConfig) -> Result<ChatResponse, GatewayError> {
        let fingerprint = request.fingerprint();
        let mut last_status = None;
        let mut last_message = String::new();
        let max_attempts = endpoint.retry.max_attempts.max(1);
        for attempt in 1..=max_attempts {
            let started = Instant::now();
            let outcome = match endpoint.kind {
                EndpointKind::Mock => self.mock_attempt(request, endpoint, attempt),
                EndpointKind::Remote => remote::attempt(request, endpoint),
            };
            let latency_ms = match endpoint.kind {
                EndpointKind::Mock => 0,
                EndpointKind::Remote => started.elapsed().as_millis() as u64,
            };
            match outcome {
                Ok((text, reason, usage)) => {
                    self.append_log(CallLogEntry {
                        seq: 0,
                        endpoint_id: endpoint.endpoint_id.clone(),
                        request_tag: request.request_tag.clone(),
                        fingerprint: fingerprint.clone(),
                        attempt,
                        status: Some(200),
                        ok: true,
                        response_text: Some(text.clone()),
                        error: None,
                        latency_ms,
                    });
                    return Ok(ChatResponse::new(text, reason, usage, latency_ms, attempt));
                }
                Err(err) => {
                    let (status, message, transient) = match err {
                        AttemptError::Transient { status, message } => (status, message, true),
                        AttemptError::Permanent { status, message } => (status, message, false),
                    };
                    self.append_log(CallLogEntry {
                        seq: 0,
                        endpoint_id: endpoint.endpoint_id.clone(),
                        request_tag: request.request_tag.clone(),
                        fingerprint: fingerprint.clone(),
                        attempt,
                        status,
                        ok: false,
                        response_text: None,
                        error: Some(message.clone()),
                        latency_ms,
                    });
                    last_status = status;
                    last_message = message;
                    if !transient {
                        return Err(GatewayError::Exhausted {
                            endpoint_id: endpoint.endpoint_id.clone(),
                            attempts: attempt,
                            last_status,
                            message: last_message,
                        });
                    }
                    if attempt < max_attempts && self.sleep && endpoint.kind == EndpointKind::Remote {
                        std::thread::sleep(Duration::from_millis(endpoint.retry.backoff_ms(attempt)));
                    }
                }
            }
        }
        Err(GatewayError::Exhausted {
            endpoint_id: endpoint.endpoint_id.clone(),
            attempts: max_attempts,
            last_status,
            message: last_message,
        })
    }

    fn mock_attempt(
        &self,
        request: &ChatRequest,
        endpoint: &EndpointConfig,
        attempt: u32,
    ) -> Result<(String, FinishReason, Usage), AttemptError> {
        let script = self
            .mocks
            .read()
            .expect("mock registry lock")
            .get(&endpoint.endpoint_id)
            .cloned()
            .ok_or_else(|| AttemptError::Permanent {
                status: None,
                message: format!("no mock script for `{}`", endpoint.endpoint_id),
            })?;
        match script.reply(request, attempt) {
            MockReply::Text(text) => {
                let usage = Usage {
                    prompt_tokens: request.messages.iter().map(|m| approx_tokens(&m.content)).sum(),
                    completion_tokens: approx_tokens(&text),
                };
                Ok((text, FinishReason::Stop, usage))
            }
            MockReply::Fail { status, message } => {
                if status == 429 || status >= 500 {
                    Err(AttemptError::Transient { status: Some(status), message })
                } else {
                    Err(AttemptError::Permanent { status: Some(status), message })
                }
            }
        }
    }

    fn append_log(&self, mut entry: CallLogEntry) {
        let mut log = self.log.lock().expect("log lock");
        entry.seq = log.entries.len() as u64 + 1;
        if let Some(file) = log.file.as_mut() {
            if let Ok(line) = serde_json::to_string(&entry) {
                if let Err(e) = writeln!(file, "{line}") {
                    log::warn!("call log write failed: {e}");
                }
            }
        }
        log.entries.push(entry);
    }

    /// Run `requests` with at most `max_parallel` in flight. The output is in
    /// input order; individual failures are reported per index. Fails as a
    /// whole only when every request failed.
    pub fn complete_batch(
        &self,
        requests: &[ChatRequest],
        endpoint: &EndpointConfig,
        max_parallel: usize,
    ) -> Result<Vec<Result<ChatResponse, GatewayError>>, GatewayError> {
        if requests.is_empty() {
            return Err(GatewayError::InvalidRequest("batch must contain at least one request".into()));
        }
        self.check_endpoint(endpoint)?;
        let workers = max_parallel.max(1).min(requests.len());
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<ChatResponse, GatewayError>>>> =
            Mutex::new((0..requests.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= requests.len() {
                        break;
                    }
                    let result = self.complete(&requests[i], endpoint);
                    slots.lock().expect("slot lock")[i] = Some(result);
                });
            }
        });
        let results: Vec<_> = slots
            .into_inner()
            .expect("slot lock")
            .into_iter()
            .map(|r| r.expect("every slot filled"))
            .collect();
        if results.iter().all(|r| r.is_err()) {
            let failures = results
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e.to_string())))
                .collect();
            return Err(GatewayError::BatchFailed { failures });
        }
        Ok(results)
    }
}

/// Rough whitespace token count, used for mock usage figures.
fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new(vec![ChatMessage::user(text)], 16).with_tag("t")
    }

    #[test]
    fn fixture_lookup_and_determinism() {
        let gw = Gateway::new();
        let x = req("X");
        let mut script = MockScript::default();
        script.insert(&x, "B");
        let ep = gw.configure_mock("m", script);
        let a = gw.complete(&x, &ep).unwrap();
        let b = gw.complete(&x, &ep).unwrap();
        assert_eq!(a.text, "B");
        assert_eq!(a.finish_reason, FinishReason::Stop);
        assert_eq!(a, b);
    }

    #[test]
    fn batch_preserves_order() {
        let gw = Gateway::new();
        let ep = gw.configure_mock("m", MockScript::responder(|r, _| MockReply::Text(r.last_user_content().to_uppercase())));
        let reqs: Vec<_> = ["a", "b", "c"].iter().map(|t| req(t)).collect();
        let out = gw.complete_batch(&reqs, &ep, 2).unwrap();
        let texts: Vec<_> = out.into_iter().map(|r| r.unwrap().text).collect();
        assert_eq!(texts, ["A", "B", "C"]);
    }

    #[test]
    fn batch_reports_partial_failures() {
        let gw = Gateway::new();
        let ep = gw.configure_mock(
            "m",
            MockScript::responder(|r, _| {
                if r.last_user_content() == "b" {
                    MockReply::Fail { status: 503, message: "down".into() }
                } else {
                    MockReply::Text("ok".into())
                }
            }),
        );
        let reqs: Vec<_> = ["a", "b", "c"].iter().map(|t| req(t)).collect();
        let out = gw.complete_batch(&reqs, &ep, 2).unwrap();
        assert!(out[0].is_ok() && out[2].is_ok());
        match &out[1] {
            Err(GatewayError::Exhausted { attempts, last_status, .. }) => {
                assert_eq!(*attempts, 3);
                assert_eq!(*last_status, Some(503));
            }
            other => panic!("unexpected {other:?}"),
        }
        // 1 + 3 + 1 attempts logged.
        assert_eq!(gw.call_log().len(), 5);
    }

    #[test]
    fn batch_of_identical_requests_is_identical() {
        let gw = Gateway::new();
        let ep = gw.configure_mock("m", MockScript::default());
        let reqs = vec![req("A. x\nB. y\nC. z"); 100];
        let out = gw.complete_batch(&reqs, &ep, 8).unwrap();
        let first = out[0].as_ref().unwrap().text.clone();
        assert!(out.iter().all(|r| r.as_ref().unwrap().text == first));
    }

    #[test]
    fn all_failed_batch_is_an_error() {
        let gw = Gateway::new();
        let ep = gw.configure_mock("m", MockScript::responder(|_, _| MockReply::Fail { status: 400, message: "bad".into() }));
        let err = gw.complete_batch(&[req("a"), req("b")], &ep, 2).unwrap_err();
        let GatewayError::BatchFailed { failures } = err else { panic!() };
        assert_eq!(failures.len(), 2);
    }

    #[test]
    fn parallelism_is_bounded() {
        let gw = Gateway::new();
        let ep = gw.configure_mock(
            "m",
            MockScript::responder(|_, _| {
                std::thread::sleep(Duration::from_millis(5));
                MockReply::Text("x".into())
            }),
        );
        let reqs = vec![req("a"); 24];
        gw.complete_batch(&reqs, &ep, 3).unwrap();
        assert!(gw.peak_in_flight() <= 3);
        assert!(gw.peak_in_flight() >= 2);
    }

    #[test]
    fn unknown_mock_is_configuration_error() {
        let gw = Gateway::new();
        let mut ep = gw.configure_mock("m", MockScript::default());
        ep.endpoint_id = "other".into();
        let err = gw.complete(&req("a"), &ep).unwrap_err();
        assert!(err.is_configuration());
    }

    #[test]
    fn missing_auth_variable_is_fatal() {
        let gw = Gateway::new();
        let mut ep = EndpointConfig::remote("r", "http://127.0.0.1:9", "m");
        ep.auth_env = Some("LOCALEVAL_TEST_SURELY_UNSET_VAR".into());
        let err = gw.complete(&req("a"), &ep).unwrap_err();
        assert_eq!(
            err,
            GatewayError::MissingAuth {
                endpoint_id: "r".into(),
                variable: "LOCALEVAL_TEST_SURELY_UNSET_VAR".into()
            }
        );
        assert!(gw.call_log().is_empty());
    }
}
