//! HTTP provider for OpenAI-compatible endpoints.

use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;

use super::provider::{CompletionRequest, Provider, ProviderError};

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4-turbo";
pub const DEFAULT_ASR_MODEL: &str = "whisper-1";
pub const DEFAULT_KEY_ENV: &str = "BOARD_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiveConfig {
    /// Base URL; `/chat/completions` and `/audio/transcriptions` are appended.
    pub endpoint: String,
    pub model: String,
    pub asr_model: String,
    pub api_key: String,
}

impl LiveConfig {
    /// Reads the key from the named environment variable.
    pub fn from_env(
        endpoint: &str,
        model: &str,
        asr_model: &str,
        key_env: &str,
    ) -> Result<Self, String> {
        let api_key = std::env::var(key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| format!("environment variable {key_env} is not set"))?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            asr_model: asr_model.to_string(),
            api_key,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LiveProvider {
    config: LiveConfig,
    http: reqwest::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct TranscriptionResponse {
    text: String,
}

fn unavailable(e: impl std::fmt::Display) -> ProviderError {
    ProviderError::Unavailable(e.to_string())
}

impl LiveProvider {
    pub fn new(config: LiveConfig) -> Result<Self, ProviderError> {
        let http = reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(10))
            .build()
            .map_err(unavailable)?;
        Ok(Self { config, http })
    }

    async fn send(&self, request: reqwest::RequestBuilder) -> Result<reqwest::Response, ProviderError> {
        let response = request
            .bearer_auth(&self.config.api_key)
            .send()
            .await
            .map_err(unavailable)?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(ProviderError::Unavailable(format!(
                "HTTP {status}: {}",
                body.chars().take(200).collect::<String>()
            )));
        }
        Ok(response)
    }
}

#[async_trait]
impl Provider for LiveProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let url = format!("{}/chat/completions", self.config.endpoint);
        let response = self.send(self.http.post(url).json(&body)).await?;
        let parsed: ChatResponse = response.json().await.map_err(unavailable)?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| unavailable("response has no message content"))
    }

    async fn transcribe(&self, chunk: &[u8]) -> Result<String, ProviderError> {
        if chunk.is_empty() {
            return Ok(String::new());
        }
        let part = reqwest::multipart::Part::bytes(chunk.to_vec()).file_name("chunk.wav");
        let form = reqwest::multipart::Form::new()
            .text("model", self.config.asr_model.clone())
            .part("file", part);
        let url = format!("{}/audio/transcriptions", self.config.endpoint);
        let response = self.send(self.http.post(url).multipart(form)).await?;
        let parsed: TranscriptionResponse = response.json().await.map_err(unavailable)?;
        Ok(parsed.text)
    }
}
