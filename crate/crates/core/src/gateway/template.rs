//! Prompt template catalog.
//!
//! Templates are plain text with `{{name}}` placeholders. Rendering
//! substitutes placeholders and does nothing else.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    RelationHints,
    RelationExpansion,
    AffinityLenses,
    AffinityAssign,
    GroupNameSimilarity,
    GoalDecompose,
    QueryExpand,
    ApplySuggestion,
    GroupDiscussionHints,
    KeyInfoExtract,
    RelevantIdeaRetrieve,
    SuggestDimensions,
}

impl TemplateId {
    pub const ALL: [TemplateId; 12] = [
        TemplateId::RelationHints,
        TemplateId::RelationExpansion,
        TemplateId::AffinityLenses,
        TemplateId::AffinityAssign,
        TemplateId::GroupNameSimilarity,
        TemplateId::GoalDecompose,
        TemplateId::QueryExpand,
        TemplateId::ApplySuggestion,
        TemplateId::GroupDiscussionHints,
        TemplateId::KeyInfoExtract,
        TemplateId::RelevantIdeaRetrieve,
        TemplateId::SuggestDimensions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::RelationHints => "relation-hints",
            TemplateId::RelationExpansion => "relation-expansion",
            TemplateId::AffinityLenses => "affinity-lenses",
            TemplateId::AffinityAssign => "affinity-assign",
            TemplateId::GroupNameSimilarity => "group-name-similarity",
            TemplateId::GoalDecompose => "goal-decompose",
            TemplateId::QueryExpand => "query-expand",
            TemplateId::ApplySuggestion => "apply-suggestion",
            TemplateId::GroupDiscussionHints => "group-discussion-hints",
            TemplateId::KeyInfoExtract => "key-info-extract",
            TemplateId::RelevantIdeaRetrieve => "relevant-idea-retrieve",
            TemplateId::SuggestDimensions => "suggest-dimensions",
        }
    }

    fn builtin_text(self) -> &'static str {
        match self {
            TemplateId::RelationHints => include_str!("../../templates/relation-hints.txt"),
            TemplateId::RelationExpansion => include_str!("../../templates/relation-expansion.txt"),
            TemplateId::AffinityLenses => include_str!("../../templates/affinity-lenses.txt"),
            TemplateId::AffinityAssign => include_str!("../../templates/affinity-assign.txt"),
            TemplateId::GroupNameSimilarity => {
                include_str!("../../templates/group-name-similarity.txt")
            }
            TemplateId::GoalDecompose => include_str!("../../templates/goal-decompose.txt"),
            TemplateId::QueryExpand => include_str!("../../templates/query-expand.txt"),
            TemplateId::ApplySuggestion => include_str!("../../templates/apply-suggestion.txt"),
            TemplateId::GroupDiscussionHints => {
                include_str!("../../templates/group-discussion-hints.txt")
            }
            TemplateId::KeyInfoExtract => include_str!("../../templates/key-info-extract.txt"),
            TemplateId::RelevantIdeaRetrieve => {
                include_str!("../../templates/relevant-idea-retrieve.txt")
            }
            TemplateId::SuggestDimensions => include_str!("../../templates/suggest-dimensions.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("template {template} needs a value for placeholder {placeholder:?}")]
pub struct MissingPlaceholder {
    pub template: String,
    pub placeholder: String,
}

fn placeholder_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}").expect("valid regex"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }

    pub fn builtin(id: TemplateId) -> Self {
        Self::new(id.as_str(), id.builtin_text())
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        placeholder_pattern()
            .captures_iter(&self.text)
            .map(|c| c[1].to_string())
            .collect()
    }

    /// Substitutes every `{{name}}`. Extra variables are ignored.
    pub fn render(&self, variables: &BTreeMap<String, String>) -> Result<String, MissingPlaceholder> {
        if let Some(missing) = self
            .placeholders()
            .into_iter()
            .find(|p| !variables.contains_key(p))
        {
            return Err(MissingPlaceholder {
                template: self.name.clone(),
                placeholder: missing,
            });
        }
        Ok(placeholder_pattern()
            .replace_all(&self.text, |c: &regex::Captures<'_>| variables[&c[1]].clone())
            .into_owned())
    }
}

/// The shipped catalog, one template per [`TemplateId`].
#[derive(Debug, Clone)]
pub struct Catalog {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for Catalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Catalog {
    pub fn builtin() -> Self {
        Self {
            templates: TemplateId::ALL
                .into_iter()
                .map(|id| (id, PromptTemplate::builtin(id)))
                .collect(),
        }
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render(
        &self,
        id: TemplateId,
        variables: &BTreeMap<String, String>,
    ) -> Result<String, MissingPlaceholder> {
        self.get(id).render(variables)
    }
}
