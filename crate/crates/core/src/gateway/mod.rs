//! Completion dispatch and answer parsing.
//!
//! A [`Dispatcher`] wraps any [`CompletionBackend`] with retry, timing and
//! audit logging. [`parse_response`] maps free text onto a question's scale
//! and [`run_batch`] fans bundles out over worker threads while keeping
//! outcomes in input order.

mod remote;
mod stub;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::governance::audit::AuditLog;
use crate::profile::{PromptBundle, Question};

pub use remote::{RemoteBackend, ENDPOINT_ENV, API_KEY_ENV};
pub use stub::{StubBackend, StubSpec};

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendFailure {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend throttled the request")]
    Throttled,
    #[error("backend rejected the request: {0}")]
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempts: {last_error}")]
    BackendUnavailable { attempts: u32, last_error: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid stub spec: {0}")]
    InvalidStub(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub bundle: PromptBundle,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_words: usize,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_output_words == 0 {
            return Err(GatewayError::InvalidRequest("max_output_words must be at least 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

pub trait CompletionBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    /// One attempt; retries are the dispatcher's job.
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendFailure>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
    pub backend_id: String,
    pub request_fingerprint: String,
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?.max(0.0) / 1000.0))
    }
}

/// Parsed answer. `category` is `None` when nothing on the scale matched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryOutcome {
    pub question_id: String,
    pub category: Option<String>,
    pub word_count: usize,
    pub over_limit: bool,
    pub fingerprint: String,
    #[serde(default)]
    pub ordinal: u64,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CategoryOutcome {
    pub fn is_unparseable(&self) -> bool {
        self.category.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, doubling from the base.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Serialize)]
struct RequestEvent<'a> {
    fingerprint: &'a str,
    question_id: &'a str,
    ordinal: u64,
    model_id: &'a str,
    backend: &'a str,
    attempts: u32,
    latency_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub struct Dispatcher {
    backend: Arc<dyn CompletionBackend>,
    retry: RetryPolicy,
    audit: Option<Arc<Mutex<AuditLog>>>,
    actor: String,
}

impl Dispatcher {
    pub fn new(backend: Arc<dyn CompletionBackend>) -> Self {
        Self {
            backend,
            retry: RetryPolicy::default(),
            audit: None,
            actor: "gateway".into(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Every dispatched request, failed or not, gets one entry in `log`.
    pub fn with_audit(mut self, log: Arc<Mutex<AuditLog>>, actor: impl Into<String>) -> Self {
        self.audit = Some(log);
        self.actor = actor.into();
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.backend_id()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<RawResponse, GatewayError> {
        request.validate()?;
        let fingerprint = request.bundle.fingerprint();
        let started = Instant::now();
        let max_attempts = self.retry.max_attempts.max(1);
        let mut attempts = 0;
        let result = loop {
            attempts += 1;
            match self.backend.complete(request) {
                Ok(text) => break Ok(text),
                Err(BackendFailure::Rejected(msg)) => break Err(GatewayError::Rejected(msg)),
                Err(failure) if attempts >= max_attempts => {
                    break Err(match failure {
                        BackendFailure::Throttled => GatewayError::RateLimited { attempts },
                        other => GatewayError::BackendUnavailable {
                            attempts,
                            last_error: other.to_string(),
                        },
                    })
                }
                Err(_) => std::thread::sleep(self.retry.delay(attempts)),
            }
        };
        let latency = started.elapsed();

        if let Some(log) = &self.audit {
            let event = RequestEvent {
                fingerprint: &fingerprint,
                question_id: &request.bundle.question.id,
                ordinal: request.bundle.provenance.ordinal,
                model_id: &request.model_id,
                backend: self.backend.backend_id(),
                attempts,
                latency_ms: latency.as_secs_f64() * 1000.0,
                response: result.as_ref().ok().map(String::as_str),
                error: result.as_ref().err().map(ToString::to_string),
            };
            let mut log = log.lock().expect("audit lock poisoned");
            // an unwritable audit trail must not pass silently
            log.append("gateway", &self.actor, &event)
                .expect("audit log chain verified on append");
        }

        result.map(|text| RawResponse {
            text,
            latency,
            backend_id: self.backend.backend_id().to_string(),
            request_fingerprint: fingerprint,
        })
    }
}

fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    let mut out = String::from(" ");
    for token in cleaned.split_whitespace() {
        out.push_str(token);
        out.push(' ');
    }
    out
}

/// Map free text onto the question's scale by case-insensitive longest
/// whole-word match. Never fails: no match yields an unparseable outcome.
pub fn parse_response(raw: &RawResponse, question: &Question, max_words: usize) -> CategoryOutcome {
    let haystack = normalize(&raw.text);
    let mut best: Option<(usize, &String)> = None;
    for category in &question.scale {
        let needle = normalize(category);
        if needle.trim().is_empty() || !haystack.contains(&needle) {
            continue;
        }
        let len = needle.len();
        if best.map_or(true, |(b, _)| len > b) {
            best = Some((len, category));
        }
    }
    let word_count = raw.text.split_whitespace().count();
    CategoryOutcome {
        question_id: question.id.clone(),
        category: best.map(|(_, c)| c.clone()),
        word_count,
        over_limit: word_count > max_words,
        fingerprint: raw.request_fingerprint.clone(),
        ordinal: 0,
        text: raw.text.clone(),
        error: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub model_id: String,
    #[serde(default)]
    pub temperature: f64,
    pub max_output_words: usize,
    pub concurrency: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            model_id: "stub".into(),
            temperature: 0.0,
            max_output_words: 4,
            concurrency: 4,
        }
    }
}

fn run_one(bundle: &PromptBundle, dispatcher: &Dispatcher, config: &BatchConfig) -> CategoryOutcome {
    let request = CompletionRequest {
        bundle: bundle.clone(),
        model_id: config.model_id.clone(),
        temperature: config.temperature,
        max_output_words: config.max_output_words,
    };
    let mut outcome = match dispatcher.complete(&request) {
        Ok(raw) => parse_response(&raw, &bundle.question, config.max_output_words),
        Err(err) => CategoryOutcome {
            question_id: bundle.question.id.clone(),
            category: None,
            word_count: 0,
            over_limit: false,
            fingerprint: bundle.fingerprint(),
            ordinal: 0,
            text: String::new(),
            error: Some(err.to_string()),
        },
    };
    outcome.ordinal = bundle.provenance.ordinal;
    outcome
}

/// Dispatch every bundle with up to `concurrency` requests in flight.
/// Outcome `i` always belongs to bundle `i`; failures become unparseable
/// outcomes carrying the error text.
pub fn run_batch(
    bundles: &[PromptBundle],
    dispatcher: &Dispatcher,
    config: &BatchConfig,
) -> Vec<CategoryOutcome> {
    let workers = config.concurrency.max(1).min(bundles.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<CategoryOutcome>>> = Mutex::new(vec![None; bundles.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= bundles.len() {
                    break;
                }
                let outcome = run_one(&bundles[i], dispatcher, config);
                slots.lock().expect("slot lock poisoned")[i] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .expect("slot lock poisoned")
        .into_iter()
        .map(|o| o.expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{render_with_provenance, Profile, PromptTemplate, QuestionBank};
    use std::sync::atomic::AtomicU32;

    fn raw(text: &str) -> RawResponse {
        RawResponse {
            text: text.into(),
            latency: Duration::ZERO,
            backend_id: "t".into(),
            request_fingerprint: "f".into(),
        }
    }

    fn likert() -> Question {
        QuestionBank::table2_default().questions[4].clone()
    }

    #[test]
    fn longest_match_wins() {
        let mut q = likert();
        q.scale.push("agree".into());
        let out = parse_response(&raw("Tend to agree"), &q, 4);
        assert_eq!(out.category.as_deref(), Some("tend to agree"));
        assert_eq!(out.word_count, 3);
        assert!(!out.over_limit);
        let out = parse_response(&raw("I TEND TO DISAGREE."), &q, 4);
        assert_eq!(out.category.as_deref(), Some("tend to disagree"));
        let out = parse_response(&raw("agree"), &q, 4);
        assert_eq!(out.category.as_deref(), Some("agree"));
    }

    #[test]
    fn verbosity_and_unparseable() {
        let q = likert();
        let out = parse_response(&raw("I strongly believe society must act now on emissions"), &q, 4);
        assert_eq!(out.word_count, 9);
        assert!(out.over_limit);
        assert!(out.is_unparseable());
        let out = parse_response(&raw("banana"), &q, 4);
        assert!(out.is_unparseable());
        assert!(!out.over_limit);
        let out = parse_response(&raw(""), &q, 4);
        assert_eq!(out.word_count, 0);
        assert!(out.is_unparseable());
    }

    #[test]
    fn retry_delay_doubles_and_caps() {
        let p = RetryPolicy { max_attempts: 5, base_delay_ms: 100, max_delay_ms: 350 };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(350));
    }

    struct Flaky {
        calls: AtomicU32,
        fail_first: u32,
        failure: BackendFailure,
    }

    impl CompletionBackend for Flaky {
        fn backend_id(&self) -> &str {
            "flaky"
        }

        fn complete(&self, _: &CompletionRequest) -> Result<String, BackendFailure> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(self.failure.clone())
            } else {
                Ok("tend to agree".into())
            }
        }
    }

    fn bundle(ordinal: u64) -> PromptBundle {
        let q = likert();
        let profile = Profile { assignment: [("age".to_string(), "20 – 29".to_string())].into_iter().collect() };
        let mut t = PromptTemplate::survey_default();
        t.sub_prompt_patterns.retain(|k, _| k == "age");
        render_with_provenance(&profile, &q, &t, 1, ordinal).unwrap()
    }

    fn request() -> CompletionRequest {
        CompletionRequest { bundle: bundle(0), model_id: "m".into(), temperature: 0.0, max_output_words: 4 }
    }

    fn fast_retry(max_attempts: u32) -> RetryPolicy {
        RetryPolicy { max_attempts, base_delay_ms: 1, max_delay_ms: 2 }
    }

    #[test]
    fn retries_then_succeeds_with_one_audit_entry() {
        let backend = Arc::new(Flaky { calls: AtomicU32::new(0), fail_first: 2, failure: BackendFailure::Unavailable("500".into()) });
        let log = Arc::new(Mutex::new(AuditLog::new()));
        let d = Dispatcher::new(backend.clone()).with_retry(fast_retry(3)).with_audit(log.clone(), "test");
        let resp = d.complete(&request()).unwrap();
        assert_eq!(resp.text, "tend to agree");
        assert_eq!(resp.request_fingerprint, request().bundle.fingerprint());
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
        let log = log.lock().unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.entries()[0].event_value().unwrap()["attempts"], 3);
    }

    #[test]
    fn exhausted_retries_and_throttling() {
        let backend = Arc::new(Flaky { calls: AtomicU32::new(0), fail_first: 10, failure: BackendFailure::Unavailable("500".into()) });
        let d = Dispatcher::new(backend).with_retry(fast_retry(3));
        assert!(matches!(d.complete(&request()), Err(GatewayError::BackendUnavailable { attempts: 3, .. })));

        let backend = Arc::new(Flaky { calls: AtomicU32::new(0), fail_first: 10, failure: BackendFailure::Throttled });
        let d = Dispatcher::new(backend).with_retry(fast_retry(2));
        assert_eq!(d.complete(&request()), Err(GatewayError::RateLimited { attempts: 2 }));

        let backend = Arc::new(Flaky { calls: AtomicU32::new(0), fail_first: 10, failure: BackendFailure::Rejected("400".into()) });
        let d = Dispatcher::new(backend.clone()).with_retry(fast_retry(5));
        assert!(matches!(d.complete(&request()), Err(GatewayError::Rejected(_))));
        assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn batch_failures_are_per_item() {
        let backend = Arc::new(Flaky { calls: AtomicU32::new(0), fail_first: 1, failure: BackendFailure::Rejected("bad".into()) });
        let log = Arc::new(Mutex::new(AuditLog::new()));
        let d = Dispatcher::new(backend).with_retry(fast_retry(1)).with_audit(log.clone(), "t");
        let bundles: Vec<_> = (0..5).map(bundle).collect();
        let cfg = BatchConfig { concurrency: 1, ..BatchConfig::default() };
        let out = run_batch(&bundles, &d, &cfg);
        assert_eq!(out.len(), 5);
        assert!(out[0].error.is_some() && out[0].is_unparseable());
        assert!(out[1..].iter().all(|o| o.category.as_deref() == Some("tend to agree")));
        assert_eq!(log.lock().unwrap().len(), 5);
        log.lock().unwrap().verify().unwrap();
    }

    #[test]
    fn empty_batch() {
        let backend = Arc::new(Flaky { calls: AtomicU32::new(0), fail_first: 0, failure: BackendFailure::Throttled });
        let d = Dispatcher::new(backend);
        assert!(run_batch(&[], &d, &BatchConfig::default()).is_empty());
    }
}
