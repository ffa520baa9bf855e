//! Scripted provider driven by JSON fixture files.
//!
//! A fixture file looks like:
//!
//! ```json
//! {
//!   "completions": [
//!     { "template": "relation-expansion",
//!       "vars": { "selectWard": "Desires" },
//!       "match": { "sourceNote": "Airbnb" },
//!       "responses": [ {"hints": [{"text": "extra service fee", "score": 0.9}]} ] }
//!   ],
//!   "transcriptions": [ { "tag": "intro", "text": "let's revisit the Airbnb budget" } ]
//! }
//! ```
//!
//! `vars` must equal the (trimmed) request variables, `match` only needs to
//! be a substring. The first matching entry wins, scanning files in name
//! order. Each entry keeps a cursor per canonical variable set, so repeated
//! identical requests step through `responses` and then repeat the last one.
//! String responses are returned verbatim; anything else is serialized.
//!
//! Audio chunks whose bytes read `fixture:<tag>` transcribe to the text of
//! that tag. An empty chunk transcribes to an empty string.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::Value;

use super::provider::{CompletionRequest, Provider, ProviderError};
use super::template::TemplateId;

pub const AUDIO_TAG_PREFIX: &str = "fixture:";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionFixture {
    pub template: TemplateId,
    #[serde(default)]
    pub vars: BTreeMap<String, String>,
    #[serde(default, rename = "match")]
    pub contains: BTreeMap<String, String>,
    pub responses: Vec<Value>,
}

impl CompletionFixture {
    pub fn new(template: TemplateId, responses: Vec<Value>) -> Self {
        Self {
            template,
            vars: BTreeMap::new(),
            contains: BTreeMap::new(),
            responses,
        }
    }

    pub fn with_var(mut self, name: &str, value: &str) -> Self {
        self.vars.insert(name.to_string(), value.to_string());
        self
    }

    pub fn matching(mut self, name: &str, fragment: &str) -> Self {
        self.contains.insert(name.to_string(), fragment.to_string());
        self
    }

    fn matches(&self, template: TemplateId, vars: &BTreeMap<String, String>) -> bool {
        self.template == template
            && self
                .vars
                .iter()
                .all(|(k, v)| vars.get(k).is_some_and(|actual| actual == v.trim()))
            && self
                .contains
                .iter()
                .all(|(k, v)| vars.get(k).is_some_and(|actual| actual.contains(v.as_str())))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioFixture {
    pub tag: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    #[serde(default)]
    pub completions: Vec<CompletionFixture>,
    #[serde(default)]
    pub transcriptions: Vec<AudioFixture>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("cannot read fixtures at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad fixture file {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("fixture for {0} has no responses")]
    NoResponses(TemplateId),
}

/// Sorted keys, trimmed values.
pub fn canonical_variables(vars: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    vars.iter()
        .map(|(k, v)| (k.clone(), v.trim().to_string()))
        .collect()
}

fn canonical_key(vars: &BTreeMap<String, String>) -> String {
    serde_json::to_string(vars).expect("string map serializes")
}

#[derive(Debug, Default)]
pub struct MockProvider {
    completions: Vec<CompletionFixture>,
    audio: HashMap<String, String>,
    cursors: Mutex<HashMap<(usize, String), usize>>,
    latency: Option<Duration>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    log: Mutex<Vec<(TemplateId, String)>>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_file(file: FixtureFile) -> Result<Self, FixtureError> {
        let mut mock = Self::new();
        mock.extend(file)?;
        Ok(mock)
    }

    pub fn from_json_str(json: &str) -> Result<Self, FixtureError> {
        let file: FixtureFile = serde_json::from_str(json).map_err(|source| FixtureError::Parse {
            path: PathBuf::from("<inline>"),
            source,
        })?;
        Self::from_file(file)
    }

    /// Loads every `*.json` file in `dir`, in file-name order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let dir = dir.as_ref();
        let io = |source| FixtureError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut mock = Self::new();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|source| FixtureError::Io {
                path: path.clone(),
                source,
            })?;
            let file: FixtureFile =
                serde_json::from_str(&text).map_err(|source| FixtureError::Parse { path, source })?;
            mock.extend(file)?;
        }
        Ok(mock)
    }

    fn extend(&mut self, file: FixtureFile) -> Result<(), FixtureError> {
        for c in file.completions {
            self.push(c)?;
        }
        for a in file.transcriptions {
            self.audio.insert(a.tag, a.text);
        }
        Ok(())
    }

    fn push(&mut self, fixture: CompletionFixture) -> Result<(), FixtureError> {
        if fixture.responses.is_empty() {
            return Err(FixtureError::NoResponses(fixture.template));
        }
        self.completions.push(fixture);
        Ok(())
    }

    pub fn with_completion(mut self, fixture: CompletionFixture) -> Self {
        self.push(fixture).expect("fixture has responses");
        self
    }

    pub fn with_audio(mut self, tag: &str, text: &str) -> Self {
        self.audio.insert(tag.to_string(), text.to_string());
        self
    }

    /// Every call sleeps this long first, on the tokio clock.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = Some(latency);
        self
    }

    /// Highest number of simultaneous `complete` calls seen so far.
    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    /// (template, canonical variables) of every completion served, in order.
    pub fn log(&self) -> Vec<(TemplateId, String)> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn audio_chunk(tag: &str) -> Vec<u8> {
        format!("{AUDIO_TAG_PREFIX}{tag}").into_bytes()
    }

    fn respond(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let vars = canonical_variables(&request.variables);
        let key = canonical_key(&vars);
        self.log
            .lock()
            .expect("log lock")
            .push((request.template, key.clone()));
        let (index, fixture) = self
            .completions
            .iter()
            .enumerate()
            .find(|(_, f)| f.matches(request.template, &vars))
            .ok_or_else(|| ProviderError::NoFixture {
                template: request.template.to_string(),
                key: key.clone(),
            })?;
        let mut cursors = self.cursors.lock().expect("cursor lock");
        let cursor = cursors.entry((index, key)).or_insert(0);
        let response = &fixture.responses[(*cursor).min(fixture.responses.len() - 1)];
        *cursor += 1;
        Ok(match response {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

#[async_trait]
impl Provider for MockProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = InFlight(&self.in_flight);
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if let Some(latency) = self.latency {
            tokio::time::sleep(latency).await;
        }
        self.respond(request)
    }

    async fn transcribe(&self, chunk: &[u8]) -> Result<String, ProviderError> {
        if chunk.is_empty() {
            return Ok(String::new());
        }
        if let Some(latency) = self.latency {
            tokio::time::sleep(latency).await;
        }
        let text = String::from_utf8_lossy(chunk);
        let tag = text
            .trim()
            .strip_prefix(AUDIO_TAG_PREFIX)
            .ok_or_else(|| ProviderError::UnknownAudio(text.chars().take(32).collect()))?;
        self.audio
            .get(tag)
            .cloned()
            .ok_or_else(|| ProviderError::UnknownAudio(tag.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn request(template: TemplateId, vars: &[(&str, &str)]) -> CompletionRequest {
        CompletionRequest {
            template,
            variables: vars.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            prompt: String::new(),
            attempt: 1,
        }
    }

    #[tokio::test]
    async fn identical_canonical_requests_get_identical_responses() {
        let mock = MockProvider::new().with_completion(CompletionFixture::new(
            TemplateId::GoalDecompose,
            vec![json!({"subtasks": []})],
        ));
        let a = mock
            .complete(&request(TemplateId::GoalDecompose, &[("goal", "trip")]))
            .await
            .unwrap();
        let b = mock
            .complete(&request(TemplateId::GoalDecompose, &[("goal", "  trip \n")]))
            .await
            .unwrap();
        assert_eq!(a, b);
    }

    #[tokio::test]
    async fn responses_step_then_repeat_per_variable_set() {
        let mock = MockProvider::new().with_completion(CompletionFixture::new(
            TemplateId::ApplySuggestion,
            vec![json!("garbage"), json!({"revision": "ok"})],
        ));
        let r = request(TemplateId::ApplySuggestion, &[("note", "n"), ("hint", "h")]);
        assert_eq!(mock.complete(&r).await.unwrap(), "garbage");
        assert_eq!(mock.complete(&r).await.unwrap(), r#"{"revision":"ok"}"#);
        assert_eq!(mock.complete(&r).await.unwrap(), r#"{"revision":"ok"}"#);
        let other = request(TemplateId::ApplySuggestion, &[("note", "m"), ("hint", "h")]);
        assert_eq!(mock.complete(&other).await.unwrap(), "garbage");
    }

    #[tokio::test]
    async fn exact_and_substring_matching_pick_first_entry() {
        let mock = MockProvider::new()
            .with_completion(
                CompletionFixture::new(TemplateId::RelationExpansion, vec![json!("desires")])
                    .with_var("selectWard", "Desires")
                    .matching("sourceNote", "Airbnb"),
            )
            .with_completion(CompletionFixture::new(
                TemplateId::RelationExpansion,
                vec![json!("fallback")],
            ));
        let hit = request(
            TemplateId::RelationExpansion,
            &[("selectWard", "Desires"), ("sourceNote", "booking Airbnb for stay")],
        );
        let miss = request(
            TemplateId::RelationExpansion,
            &[("selectWard", "Causes"), ("sourceNote", "booking Airbnb for stay")],
        );
        assert_eq!(mock.complete(&hit).await.unwrap(), "desires");
        assert_eq!(mock.complete(&miss).await.unwrap(), "fallback");
        assert!(matches!(
            mock.complete(&request(TemplateId::QueryExpand, &[])).await,
            Err(ProviderError::NoFixture { .. })
        ));
    }

    #[tokio::test]
    async fn audio_fixtures() {
        let mock = MockProvider::new().with_audio("a", "hello there");
        assert_eq!(mock.transcribe(&MockProvider::audio_chunk("a")).await.unwrap(), "hello there");
        assert_eq!(mock.transcribe(b"").await.unwrap(), "");
        assert!(mock.transcribe(b"fixture:zzz").await.is_err());
        assert!(mock.transcribe(&[0xff, 0x00]).await.is_err());
    }

    #[test]
    fn loads_directory_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("b.json"),
            r#"{"completions":[{"template":"goal-decompose","responses":["from b"]}]}"#,
        )
        .unwrap();
        std::fs::write(
            dir.path().join("a.json"),
            r#"{"completions":[{"template":"goal-decompose","responses":["from a"]}]}"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let mock = MockProvider::from_dir(dir.path()).unwrap();
        let out = futures::executor::block_on(mock.complete(&request(TemplateId::GoalDecompose, &[])));
        assert_eq!(out.unwrap(), "from a");
    }

    #[test]
    fn rejects_entries_without_responses() {
        let err = MockProvider::from_json_str(
            r#"{"completions":[{"template":"goal-decompose","responses":[]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, FixtureError::NoResponses(TemplateId::GoalDecompose)));
    }
}
