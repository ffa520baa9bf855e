//! Output schemas for each template, and JSON extraction from model text.
//!
//! Models are asked for JSON but often wrap it in prose or code fences, so
//! parsing looks for the first JSON object that deserializes into the
//! expected shape. Validation never clamps: an out-of-range score makes the
//! whole output malformed.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub trait StructuredOutput: DeserializeOwned + Send + 'static {
    fn validate(&self) -> Result<(), String>;
}

fn check_score(what: &str, score: f64) -> Result<(), String> {
    if score.is_finite() && (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(format!("{what} {score} is outside [0, 1]"))
    }
}

fn check_text(what: &str, text: &str) -> Result<(), String> {
    if text.trim().is_empty() {
        Err(format!("{what} is empty"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRelation {
    pub source: String,
    pub target: String,
    #[serde(rename = "type")]
    pub relation_type: String,
    #[serde(default)]
    pub explanation: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationsOutput {
    pub relations: Vec<RawRelation>,
}

impl StructuredOutput for RelationsOutput {
    fn validate(&self) -> Result<(), String> {
        for r in &self.relations {
            check_score("confidence", r.confidence)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    pub text: String,
    pub score: f64,
}

/// Shared by relation expansion, query expansion and group discussion hints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintsOutput {
    pub hints: Vec<ScoredText>,
}

impl StructuredOutput for HintsOutput {
    fn validate(&self) -> Result<(), String> {
        for h in &self.hints {
            check_text("hint text", &h.text)?;
            check_score("hint score", h.score)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDescription {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawLens {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub groups: Vec<NamedDescription>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensesOutput {
    pub lenses: Vec<RawLens>,
}

pub const MIN_LENSES: usize = 2;

impl RawLens {
    /// Groups with distinct names (trimmed, case-insensitive), first kept.
    pub fn distinct_groups(&self) -> Vec<NamedDescription> {
        let mut seen = std::collections::HashSet::new();
        self.groups
            .iter()
            .filter(|g| seen.insert(g.name.trim().to_lowercase()))
            .map(|g| NamedDescription {
                name: g.name.trim().to_string(),
                description: g.description.trim().to_string(),
            })
            .collect()
    }
}

impl LensesOutput {
    /// Lenses with distinct names and at least two distinct groups.
    pub fn usable(&self) -> Vec<&RawLens> {
        let mut seen = std::collections::HashSet::new();
        self.lenses
            .iter()
            .filter(|l| l.distinct_groups().len() >= 2)
            .filter(|l| seen.insert(l.name.trim().to_lowercase()))
            .collect()
    }
}

impl StructuredOutput for LensesOutput {
    fn validate(&self) -> Result<(), String> {
        for l in &self.lenses {
            check_text("lens name", &l.name)?;
            for g in &l.groups {
                check_text("group name", &g.name)?;
            }
        }
        let usable = self.usable().len();
        if usable < MIN_LENSES {
            return Err(format!(
                "expected at least {MIN_LENSES} distinct lenses with two or more groups, got {usable}"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAssignment {
    pub name: String,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignOutput {
    pub groups: Vec<RawAssignment>,
}

impl StructuredOutput for AssignOutput {
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub first: String,
    pub second: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarityOutput {
    pub similarities: Vec<PairScore>,
    #[serde(default)]
    pub revised_groups: Vec<NamedDescription>,
}

impl StructuredOutput for SimilarityOutput {
    fn validate(&self) -> Result<(), String> {
        for s in &self.similarities {
            check_score("similarity", s.score)?;
        }
        for g in &self.revised_groups {
            check_text("revised group name", &g.name)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSubtask {
    pub title: String,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOutput {
    pub subtasks: Vec<RawSubtask>,
}

pub const MIN_SUBTASKS: usize = 3;

impl DecomposeOutput {
    /// Subtasks with distinct titles (trimmed, case-insensitive), first
    /// occurrence kept.
    pub fn distinct(&self) -> Vec<&RawSubtask> {
        let mut seen = std::collections::HashSet::new();
        self.subtasks
            .iter()
            .filter(|s| seen.insert(s.title.trim().to_lowercase()))
            .collect()
    }
}

impl StructuredOutput for DecomposeOutput {
    fn validate(&self) -> Result<(), String> {
        for s in &self.subtasks {
            check_text("subtask title", &s.title)?;
        }
        let distinct = self.distinct().len();
        if distinct < MIN_SUBTASKS {
            return Err(format!("expected at least {MIN_SUBTASKS} distinct subtasks, got {distinct}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionOutput {
    pub revision: String,
}

impl StructuredOutput for RevisionOutput {
    fn validate(&self) -> Result<(), String> {
        check_text("revision", &self.revision)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawKeyInfo {
    pub summary: String,
    #[serde(default)]
    pub related_note: Option<String>,
    pub relevance: f64,
    #[serde(default)]
    pub segments: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyInfoOutput {
    pub key_information: Vec<RawKeyInfo>,
}

impl StructuredOutput for KeyInfoOutput {
    fn validate(&self) -> Result<(), String> {
        for k in &self.key_information {
            check_text("summary", &k.summary)?;
            check_score("relevance", k.relevance)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRelevantNote {
    pub note: String,
    #[serde(default)]
    pub sentence: String,
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveOutput {
    pub notes: Vec<RawRelevantNote>,
}

impl StructuredOutput for RetrieveOutput {
    fn validate(&self) -> Result<(), String> {
        for n in &self.notes {
            check_score("relevance", n.relevance)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionsOutput {
    pub dimensions: Vec<String>,
}

pub const MIN_DIMENSIONS: usize = 2;

impl DimensionsOutput {
    pub fn distinct(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.dimensions
            .iter()
            .map(|d| d.trim().to_string())
            .filter(|d| seen.insert(d.to_lowercase()))
            .collect()
    }
}

impl StructuredOutput for DimensionsOutput {
    fn validate(&self) -> Result<(), String> {
        for d in &self.dimensions {
            check_text("dimension", d)?;
        }
        let distinct = self.distinct().len();
        if distinct < MIN_DIMENSIONS {
            return Err(format!("expected at least {MIN_DIMENSIONS} distinct dimensions, got {distinct}"));
        }
        Ok(())
    }
}

/// Raw JSON passthrough, for callers that only need well-formed JSON.
impl StructuredOutput for serde_json::Value {
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

/// Finds the first JSON object in `text` that deserializes to `T` and passes
/// validation.
pub fn parse_structured<T: StructuredOutput>(text: &str) -> Result<T, String> {
    let mut last_error = String::from("no JSON object found in output");
    for (start, _) in text.char_indices().filter(|(_, c)| *c == '{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<serde_json::Value>();
        let value = match stream.next() {
            Some(Ok(v)) => v,
            _ => continue,
        };
        match serde_json::from_value::<T>(value) {
            Ok(parsed) => match parsed.validate() {
                Ok(()) => return Ok(parsed),
                // A schema match that fails validation is the answer, not noise.
                Err(e) => return Err(e),
            },
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(last_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bare_json() {
        let out: HintsOutput = parse_structured(r#"{"hints":[{"text":"a","score":0.7}]}"#).unwrap();
        assert_eq!(out.hints[0].text, "a");
    }

    #[test]
    fn parses_fenced_json_with_prose() {
        let text = "Sure, here it is:\n```json\n{\"dimensions\": [\"cost tier\", \"location\"]}\n```\nHope this helps.";
        let out: DimensionsOutput = parse_structured(text).unwrap();
        assert_eq!(out.dimensions, vec!["cost tier", "location"]);
    }

    #[test]
    fn skips_unrelated_objects_before_the_answer() {
        let text = r#"Format is {"example": true}. Answer: {"revision": "Book Airbnb"}"#;
        let out: RevisionOutput = parse_structured(text).unwrap();
        assert_eq!(out.revision, "Book Airbnb");
    }

    #[test]
    fn out_of_range_scores_are_rejected_not_clamped() {
        let err = parse_structured::<HintsOutput>(r#"{"hints":[{"text":"a","score":1.2}]}"#).unwrap_err();
        assert!(err.contains("outside"), "{err}");
        let err = parse_structured::<RelationsOutput>(
            r#"{"relations":[{"source":"1","target":"2","type":"Causes","confidence":-0.1}]}"#,
        )
        .unwrap_err();
        assert!(err.contains("outside"), "{err}");
    }

    #[test]
    fn garbage_is_an_error() {
        assert!(parse_structured::<HintsOutput>("I cannot help with that").is_err());
        assert!(parse_structured::<HintsOutput>("{not json").is_err());
        assert!(parse_structured::<HintsOutput>(r#"{"other": 1}"#).is_err());
    }

    #[test]
    fn key_info_uses_camel_case_fields() {
        let out: KeyInfoOutput = parse_structured(
            r#"{"keyInformation":[{"summary":"s","relatedNote":"2","relevance":0.8,"segments":[0,1]}]}"#,
        )
        .unwrap();
        assert_eq!(out.key_information[0].related_note.as_deref(), Some("2"));
        assert_eq!(out.key_information[0].segments, vec![0, 1]);
    }
}
