use std::collections::BTreeMap;
use std::fmt::Debug;

use async_trait::async_trait;

use super::template::TemplateId;

/// One rendered prompt, plus the inputs it was rendered from so scripted
/// providers can key on them.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub template: TemplateId,
    pub variables: BTreeMap<String, String>,
    pub prompt: String,
    /// 1 for the first ask, 2+ for repair retries.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("no fixture matches {template} with {key}")]
    NoFixture { template: String, key: String },
    #[error("unknown audio fixture {0:?}")]
    UnknownAudio(String),
}

#[async_trait]
pub trait Provider: Send + Sync + Debug {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;
    async fn transcribe(&self, chunk: &[u8]) -> Result<String, ProviderError>;
}
