//! Text/vision completion contract shared by every generation and judging
//! stage.
//!
//! A [`CompletionProvider`] answers one request. [`Client`] wraps a provider
//! with the retry budget, exponential backoff, a bound on in-flight requests
//! and the optional on-disk response cache. [`ScriptedMock`] answers from a
//! fixed script and is what the test suite and offline pipeline runs use.

mod cache;
mod generate;
#[cfg(feature = "http")]
mod http;
mod images;
mod mock;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{BoundingBox, Point};

pub use cache::ResponseCache;
pub(crate) use generate::render;
pub use generate::{
    extract_json, gen_action_detail, gen_action_intents, gen_continuous_detail,
    gen_element_action_detail, gen_element_annotation, ComponentContext, ElementContext,
    CONTEXT_PAD,
};
#[cfg(feature = "http")]
pub use http::HttpProvider;
pub use images::render_image_ref;
pub use mock::{MockScript, ScriptedMock};

/// A marker drawn onto an image before it is sent to a vision model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mark {
    /// Red outline around a box.
    Highlight { bbox: BoundingBox },
    /// Green dot and ring at a click position.
    Click { point: Point },
}

/// An image as seen by the provider: a file, optionally cropped, optionally
/// annotated. Coordinates are in the file's pixel frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRef {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marks: Vec<Mark>,
}

impl ImageRef {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            region: None,
            marks: Vec::new(),
        }
    }

    pub fn cropped(mut self, region: BoundingBox) -> Self {
        self.region = Some(region);
        self
    }

    pub fn marked(mut self, mark: Mark) -> Self {
        self.marks.push(mark);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    #[serde(default)]
    pub images: Vec<ImageRef>,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Pipeline stage, e.g. `action_intents`.
    pub tag: String,
    /// Sample key within the stage; used by scripted mocks.
    #[serde(default)]
    pub id: Option<String>,
}

impl CompletionRequest {
    pub fn new(tag: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            images: Vec::new(),
            max_tokens: 1024,
            temperature: 0.0,
            tag: tag.into(),
            id: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_images(mut self, images: Vec<ImageRef>) -> Self {
        self.images = images;
        self
    }

    /// Content hash of `(prompt, images, model)`, hex encoded.
    pub fn content_hash(&self, model: &str) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            model: &'a str,
            prompt: &'a str,
            images: &'a [ImageRef],
        }
        let key = serde_json::to_vec(&Key {
            model,
            prompt: &self.prompt,
            images: &self.images,
        })
        .expect("request key serializes");
        hex::encode(Sha256::digest(&key))
    }

    pub(crate) fn validate(&self) -> Result<(), ProviderError> {
        if self.prompt.trim().is_empty() {
            return Err(ProviderError::Config("request prompt is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("unscripted request (tag `{tag}`, id {id:?}, hash {hash})")]
    Unscripted {
        tag: String,
        id: Option<String>,
        hash: String,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("payload of {bytes} bytes exceeds the {limit}-byte limit")]
    Oversized { bytes: usize, limit: usize },
    #[error("gave up after {attempts} attempts: {last}")]
    ExhaustedRetries {
        attempts: u32,
        #[source]
        last: Box<ProviderError>,
    },
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("image preparation failed: {0}")]
    Image(String),
}

impl ProviderError {
    /// Worth retrying: transport hiccups, timeouts, 429 and 5xx.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::Transport(_) | ProviderError::Timeout(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait CompletionProvider: Send + Sync {
    fn model(&self) -> &str;

    fn send(&self, req: &CompletionRequest, cfg: &ProviderConfig) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Base URL of an OpenAI-compatible `chat/completions` endpoint.
    pub endpoint: Option<String>,
    /// Environment variable holding the API key.
    pub credential_env: Option<String>,
    pub model: String,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
    pub max_payload_bytes: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            credential_env: Some("GROUNDSYNTH_API_KEY".into()),
            model: "gpt-4o".into(),
            timeout_ms: 60_000,
            retries: 3,
            backoff_ms: 500,
            max_in_flight: 4,
            max_payload_bytes: 20 * 1024 * 1024,
            cache_dir: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.max_in_flight == 0 {
            return Err(ProviderError::Config(
                "max_in_flight must be at least 1".into(),
            ));
        }
        if self.timeout_ms == 0 {
            return Err(ProviderError::Config("timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Provider plus retry, caching and concurrency policy.
pub struct Client {
    provider: Arc<dyn CompletionProvider>,
    cfg: ProviderConfig,
    cache: Option<ResponseCache>,
    gate: Gate,
    calls: AtomicUsize,
    sleep: fn(Duration),
}

impl Client {
    pub fn new(
        provider: Arc<dyn CompletionProvider>,
        cfg: ProviderConfig,
    ) -> Result<Self, ProviderError> {
        cfg.validate()?;
        let cache = match &cfg.cache_dir {
            Some(dir) => {
                Some(ResponseCache::open(dir).map_err(|e| ProviderError::Config(e.to_string()))?)
            }
            None => None,
        };
        Ok(Self {
            gate: Gate::new(cfg.max_in_flight),
            provider,
            cfg,
            cache,
            calls: AtomicUsize::new(0),
            sleep: std::thread::sleep,
        })
    }

    /// A client around a scripted mock with no retries or cache.
    pub fn mock(mock: ScriptedMock) -> Self {
        let cfg = ProviderConfig {
            model: mock.model().to_string(),
            credential_env: None,
            retries: 0,
            ..ProviderConfig::default()
        };
        Self::new(Arc::new(mock), cfg).expect("default config is valid")
    }

    #[cfg(test)]
    fn without_sleep(mut self) -> Self {
        self.sleep = |_| {};
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    /// Number of requests that reached the provider (cache hits excluded).
    pub fn provider_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        req.validate()?;
        let key = req.content_hash(self.provider.model());
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            log::debug!("cache hit for {} ({key})", req.tag);
            return Ok(hit);
        }

        let mut attempt = 0u32;
        let text = loop {
            let result = {
                let _permit = self.gate.acquire();
                self.calls.fetch_add(1, Ordering::SeqCst);
                self.provider.send(req, &self.cfg)
            };
            match result {
                Ok(text) => break text,
                Err(e) if e.is_transient() && attempt < self.cfg.retries => {
                    let delay = self.cfg.backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("{}: {e}; retrying in {delay} ms", req.tag);
                    (self.sleep)(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) if e.is_transient() => {
                    return Err(ProviderError::ExhaustedRetries {
                        attempts: attempt + 1,
                        last: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        };

        if let Some(cache) = &self.cache {
            if let Err(e) = cache.put(&key, &text) {
                log::warn!("could not write cache entry {key}: {e}");
            }
        }
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    struct Flaky {
        failures_left: AtomicU32,
        error: fn() -> ProviderError,
        in_flight: AtomicUsize,
        peak: AtomicUsize,
    }

    impl Flaky {
        fn new(failures: u32, error: fn() -> ProviderError) -> Self {
            Self {
                failures_left: AtomicU32::new(failures),
                error,
                in_flight: AtomicUsize::new(0),
                peak: AtomicUsize::new(0),
            }
        }
    }

    impl CompletionProvider for Flaky {
        fn model(&self) -> &str {
            "flaky"
        }

        fn send(
            &self,
            req: &CompletionRequest,
            _: &ProviderConfig,
        ) -> Result<String, ProviderError> {
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(2));
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            let left = self.failures_left.load(Ordering::SeqCst);
            if left > 0 {
                self.failures_left.store(left - 1, Ordering::SeqCst);
                return Err((self.error)());
            }
            Ok(format!("echo:{}", req.prompt))
        }
    }

    fn cfg(retries: u32) -> ProviderConfig {
        ProviderConfig {
            model: "flaky".into(),
            retries,
            backoff_ms: 1,
            ..ProviderConfig::default()
        }
    }

    #[test]
    fn retries_transient_failures_within_budget() {
        let flaky = Arc::new(Flaky::new(2, || ProviderError::Transport("reset".into())));
        let client = Client::new(flaky, cfg(2)).unwrap().without_sleep();
        assert_eq!(
            client.complete(&CompletionRequest::new("t", "hi")).unwrap(),
            "echo:hi"
        );
        assert_eq!(client.provider_calls(), 3);
    }

    #[test]
    fn exhausted_retries_are_distinct() {
        let flaky = Arc::new(Flaky::new(5, || ProviderError::Status {
            status: 503,
            body: String::new(),
        }));
        let client = Client::new(flaky, cfg(1)).unwrap().without_sleep();
        let err = client
            .complete(&CompletionRequest::new("t", "hi"))
            .unwrap_err();
        assert!(
            matches!(err, ProviderError::ExhaustedRetries { attempts: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn auth_and_oversize_are_not_retried() {
        let flaky = Arc::new(Flaky::new(5, || ProviderError::Auth("bad key".into())));
        let client = Client::new(flaky, cfg(3)).unwrap().without_sleep();
        assert!(matches!(
            client.complete(&CompletionRequest::new("t", "hi")),
            Err(ProviderError::Auth(_))
        ));
        assert_eq!(client.provider_calls(), 1);

        let flaky = Arc::new(Flaky::new(5, || ProviderError::Oversized {
            bytes: 10,
            limit: 5,
        }));
        let client = Client::new(flaky, cfg(3)).unwrap().without_sleep();
        assert!(matches!(
            client.complete(&CompletionRequest::new("t", "hi")),
            Err(ProviderError::Oversized { .. })
        ));
    }

    #[test]
    fn cache_hit_skips_the_provider() {
        let dir = tempfile::tempdir().unwrap();
        let flaky = Arc::new(Flaky::new(0, || unreachable!()));
        let config = ProviderConfig {
            cache_dir: Some(dir.path().to_path_buf()),
            ..cfg(0)
        };
        let client = Client::new(flaky.clone(), config.clone()).unwrap();
        let req = CompletionRequest::new("t", "cached?");
        let first = client.complete(&req).unwrap();
        assert_eq!(client.provider_calls(), 1);

        let fresh = Client::new(flaky, config).unwrap();
        assert_eq!(fresh.complete(&req).unwrap(), first);
        assert_eq!(fresh.provider_calls(), 0);

        let other =
            CompletionRequest::new("t", "cached?").with_images(vec![ImageRef::file("a.png")]);
        assert_ne!(other.content_hash("flaky"), req.content_hash("flaky"));
        assert_ne!(req.content_hash("flaky"), req.content_hash("other-model"));
    }

    #[test]
    fn in_flight_requests_are_bounded() {
        let flaky = Arc::new(Flaky::new(0, || unreachable!()));
        let client = Arc::new(
            Client::new(
                flaky.clone(),
                ProviderConfig {
                    max_in_flight: 2,
                    ..cfg(0)
                },
            )
            .unwrap(),
        );
        std::thread::scope(|s| {
            for i in 0..8 {
                let client = client.clone();
                s.spawn(move || {
                    client
                        .complete(&CompletionRequest::new("t", format!("p{i}")))
                        .unwrap()
                });
            }
        });
        assert!(flaky.peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(client.provider_calls(), 8);
    }

    #[test]
    fn invalid_config_and_requests() {
        let flaky = Arc::new(Flaky::new(0, || unreachable!()));
        assert!(Client::new(
            flaky.clone(),
            ProviderConfig {
                max_in_flight: 0,
                ..cfg(0)
            }
        )
        .is_err());
        let client = Client::new(flaky, cfg(0)).unwrap();
        assert!(matches!(
            client.complete(&CompletionRequest::new("t", "  ")),
            Err(ProviderError::Config(_))
        ));
    }
}
