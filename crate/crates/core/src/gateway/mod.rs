//! The only path to language-model and speech-recognition providers.
//!
//! Engines call [`ScopedGateway::complete_structured`] with a template id and
//! variables; the gateway renders the prompt, enforces the per-workspace
//! in-flight cap, applies the call timeout, parses the reply against the
//! expected schema and re-asks with a repair instruction when parsing fails.

pub mod live;
pub mod mock;
pub mod provider;
pub mod schema;
pub mod template;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tokio::sync::Semaphore;

use crate::ids::WorkspaceId;

pub use live::{LiveConfig, LiveProvider};
pub use mock::{CompletionFixture, FixtureError, FixtureFile, MockProvider};
pub use provider::{CompletionRequest, Provider, ProviderError};
pub use schema::{parse_structured, StructuredOutput};
pub use template::{Catalog, MissingPlaceholder, PromptTemplate, TemplateId};

pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

const REPAIR_INSTRUCTION: &str = "Your previous reply could not be used";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatewayConfig {
    pub max_retries: u32,
    pub timeout: Duration,
    /// Concurrent provider requests allowed per workspace; extra requests
    /// queue in arrival order.
    pub max_in_flight: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            max_retries: DEFAULT_MAX_RETRIES,
            timeout: DEFAULT_TIMEOUT,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("{template} output unusable after {attempts} attempts: {detail}")]
    MalformedOutput {
        template: TemplateId,
        attempts: u32,
        detail: String,
        raw: String,
    },
    #[error("provider call timed out after {0:?}")]
    Timeout(Duration),
    #[error(transparent)]
    MissingPlaceholder(#[from] MissingPlaceholder),
    #[error("no active recording")]
    NoActiveRecording,
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::ProviderUnavailable(_) => "ProviderUnavailable",
            GatewayError::MalformedOutput { .. } => "MalformedOutput",
            GatewayError::Timeout(_) => "Timeout",
            GatewayError::MissingPlaceholder(_) => "MissingPlaceholder",
            GatewayError::NoActiveRecording => "NoActiveRecording",
        }
    }
}

impl From<ProviderError> for GatewayError {
    fn from(e: ProviderError) -> Self {
        GatewayError::ProviderUnavailable(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredResult<T> {
    pub value: T,
    pub raw_text: String,
    pub attempts: u32,
}

#[derive(Debug, Default)]
struct Counters {
    completions: Mutex<BTreeMap<TemplateId, u64>>,
    transcriptions: AtomicU64,
}

#[derive(Debug)]
struct Inner {
    provider: Arc<dyn Provider>,
    catalog: Catalog,
    config: GatewayConfig,
    permits: Mutex<HashMap<WorkspaceId, Arc<Semaphore>>>,
    counters: Counters,
}

/// Cheap to clone; clones share provider, limits and counters.
#[derive(Debug, Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>) -> Self {
        Self::with_config(provider, GatewayConfig::default())
    }

    pub fn with_config(provider: Arc<dyn Provider>, config: GatewayConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                provider,
                catalog: Catalog::builtin(),
                config,
                permits: Mutex::new(HashMap::new()),
                counters: Counters::default(),
            }),
        }
    }

    pub fn mock(mock: MockProvider) -> Self {
        Self::new(Arc::new(mock))
    }

    pub fn live(config: LiveConfig) -> Result<Self, GatewayError> {
        Ok(Self::new(Arc::new(LiveProvider::new(config)?)))
    }

    pub fn config(&self) -> GatewayConfig {
        self.inner.config
    }

    pub fn catalog(&self) -> &Catalog {
        &self.inner.catalog
    }

    pub fn render(
        &self,
        template: TemplateId,
        variables: &BTreeMap<String, String>,
    ) -> Result<String, MissingPlaceholder> {
        self.inner.catalog.render(template, variables)
    }

    pub fn for_workspace(&self, workspace: &WorkspaceId) -> ScopedGateway {
        let permits = self
            .inner
            .permits
            .lock()
            .expect("permit lock")
            .entry(workspace.clone())
            .or_insert_with(|| Arc::new(Semaphore::new(self.inner.config.max_in_flight)))
            .clone();
        ScopedGateway {
            gateway: self.clone(),
            permits,
        }
    }

    /// Provider completion calls made so far, including retries.
    pub fn completion_calls(&self) -> u64 {
        self.completion_calls_by_template().values().sum()
    }

    pub fn completion_calls_for(&self, template: TemplateId) -> u64 {
        self.completion_calls_by_template()
            .get(&template)
            .copied()
            .unwrap_or(0)
    }

    pub fn completion_calls_by_template(&self) -> BTreeMap<TemplateId, u64> {
        self.inner
            .counters
            .completions
            .lock()
            .expect("counter lock")
            .clone()
    }

    pub fn transcription_calls(&self) -> u64 {
        self.inner.counters.transcriptions.load(Ordering::SeqCst)
    }

    async fn call(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        *self
            .inner
            .counters
            .completions
            .lock()
            .expect("counter lock")
            .entry(request.template)
            .or_insert(0) += 1;
        let timeout = self.inner.config.timeout;
        match tokio::time::timeout(timeout, self.inner.provider.complete(request)).await {
            Ok(result) => Ok(result?),
            Err(_) => Err(GatewayError::Timeout(timeout)),
        }
    }
}

/// A gateway bound to one workspace's in-flight limit.
#[derive(Debug, Clone)]
pub struct ScopedGateway {
    gateway: Gateway,
    permits: Arc<Semaphore>,
}

impl ScopedGateway {
    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub async fn complete_structured<T: StructuredOutput>(
        &self,
        template: TemplateId,
        variables: &BTreeMap<String, String>,
    ) -> Result<StructuredResult<T>, GatewayError> {
        let base = self.gateway.render(template, variables)?;
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        let max_attempts = self.gateway.inner.config.max_retries + 1;
        let mut prompt = base.clone();
        let mut attempt = 1;
        loop {
            let request = CompletionRequest {
                template,
                variables: variables.clone(),
                prompt: prompt.clone(),
                attempt,
            };
            let raw = self.gateway.call(&request).await?;
            match parse_structured::<T>(&raw) {
                Ok(value) => {
                    return Ok(StructuredResult {
                        value,
                        raw_text: raw,
                        attempts: attempt,
                    })
                }
                Err(detail) if attempt >= max_attempts => {
                    tracing::warn!(%template, attempt, %detail, "giving up on malformed output");
                    return Err(GatewayError::MalformedOutput {
                        template,
                        attempts: attempt,
                        detail,
                        raw,
                    });
                }
                Err(detail) => {
                    tracing::debug!(%template, attempt, %detail, "repairing malformed output");
                    prompt = format!(
                        "{base}\n\n{REPAIR_INSTRUCTION} ({detail}). Reply again with only the required JSON format."
                    );
                    attempt += 1;
                }
            }
        }
    }

    pub async fn transcribe(&self, chunk: &[u8]) -> Result<String, GatewayError> {
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        self.gateway
            .inner
            .counters
            .transcriptions
            .fetch_add(1, Ordering::SeqCst);
        let timeout = self.gateway.inner.config.timeout;
        match tokio::time::timeout(timeout, self.gateway.inner.provider.transcribe(chunk)).await {
            Ok(result) => Ok(result?),
            Err(_) => Err(GatewayError::Timeout(timeout)),
        }
    }
}

/// Builds a variable map from string pairs.
pub fn vars<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}
