//! Idea-level assistance: goal decomposition, query and relation based
//! expansion, applying a hint to a note, and discussion hints for a group.
//!
//! Every function here reads a published state and returns either data for
//! the requesting client or a mutation to submit; none of them changes the
//! workspace directly.

use serde::{Deserialize, Serialize};

use crate::error::AiError;
use crate::gateway::schema::{DecomposeOutput, HintsOutput, RevisionOutput, ScoredText};
use crate::gateway::{vars, ScopedGateway, TemplateId};
use crate::ids::{GroupId, NoteId};
use crate::keyed::KeyedNotes;
use crate::workspace::{MutationKind, Page, Position, Provenance, RelationType, WorkspaceState};

pub const MAX_SUBTASKS: usize = 8;
pub const RELATION_EXPANSION_CAP: usize = 3;
pub const DISCUSSION_HINT_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubtaskCard {
    pub title: String,
    pub brief_detail: String,
    #[serde(default)]
    pub expanded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdeaHintKind {
    QueryExpansion,
    RelationExpansion,
    DiscussionHint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum HintSource {
    Note(NoteId),
    Group(GroupId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IdeaHint {
    pub text: String,
    pub score: f64,
    pub kind: IdeaHintKind,
    pub source: HintSource,
}

/// Keeps hints scoring strictly above `threshold`, best first (provider
/// order breaks ties), at most `cap` of them.
pub fn surface_hints(raw: &[ScoredText], threshold: f64, cap: Option<usize>) -> Vec<ScoredText> {
    let mut kept: Vec<ScoredText> = raw
        .iter()
        .filter(|h| h.score > threshold)
        .cloned()
        .collect();
    kept.sort_by(|a, b| b.score.total_cmp(&a.score));
    if let Some(cap) = cap {
        kept.truncate(cap);
    }
    kept
}

fn to_hints(raw: Vec<ScoredText>, kind: IdeaHintKind, source: HintSource) -> Vec<IdeaHint> {
    raw.into_iter()
        .map(|h| IdeaHint {
            text: h.text.trim().to_string(),
            score: h.score,
            kind,
            source: source.clone(),
        })
        .collect()
}

fn note_text<'a>(state: &'a WorkspaceState, note: &NoteId) -> Result<&'a str, AiError> {
    state
        .note(note)
        .map(|n| n.text.as_str())
        .ok_or_else(|| AiError::unknown("note", note))
}

pub async fn decompose_goal(gw: &ScopedGateway, goal: &str) -> Result<Vec<SubtaskCard>, AiError> {
    if goal.trim().is_empty() {
        return Err(AiError::EmptyGoal);
    }
    let out = gw
        .complete_structured::<DecomposeOutput>(TemplateId::GoalDecompose, &vars([("goal", goal)]))
        .await?;
    Ok(out
        .value
        .distinct()
        .into_iter()
        .take(MAX_SUBTASKS)
        .map(|s| SubtaskCard {
            title: s.title.trim().to_string(),
            brief_detail: s.detail.trim().to_string(),
            expanded: false,
        })
        .collect())
}

/// Turns a subtask card into an empty group on the main page and marks the
/// card expanded.
pub fn expand_subtask(state: &WorkspaceState, card: &mut SubtaskCard) -> Result<MutationKind, AiError> {
    if card.expanded {
        return Err(AiError::AlreadyExpanded(card.title.clone()));
    }
    card.expanded = true;
    let top_level = state
        .groups
        .values()
        .filter(|g| g.page == Page::Main && g.parent.is_none())
        .count();
    Ok(MutationKind::CreateGroup {
        id: None,
        title: card.title.clone(),
        page: Page::Main,
        parent: None,
        position: Position::new(top_level as f64 * 8.0, -8.0),
        rationale: Some(card.brief_detail.clone()).filter(|d| !d.is_empty()),
        members: Vec::new(),
    })
}

pub async fn expand_by_query(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    note: &NoteId,
    query: &str,
) -> Result<Vec<IdeaHint>, AiError> {
    let text = note_text(state, note)?;
    if query.trim().is_empty() {
        return Err(AiError::EmptyQuery);
    }
    let out = gw
        .complete_structured::<HintsOutput>(
            TemplateId::QueryExpand,
            &vars([("note", text), ("query", query)]),
        )
        .await?;
    let kept = surface_hints(&out.value.hints, state.settings.confidence_threshold, None);
    Ok(to_hints(kept, IdeaHintKind::QueryExpansion, HintSource::Note(note.clone())))
}

pub async fn expand_by_relation(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    note: &NoteId,
    relation: &str,
) -> Result<Vec<IdeaHint>, AiError> {
    let text = note_text(state, note)?;
    let relation: RelationType = relation.parse()?;
    let out = gw
        .complete_structured::<HintsOutput>(
            TemplateId::RelationExpansion,
            &vars([
                ("selectWard", relation.label()),
                ("relationGloss", relation.gloss()),
                ("sourceNote", text),
            ]),
        )
        .await?;
    let kept = surface_hints(
        &out.value.hints,
        state.settings.confidence_threshold,
        Some(RELATION_EXPANSION_CAP),
    );
    Ok(to_hints(kept, IdeaHintKind::RelationExpansion, HintSource::Note(note.clone())))
}

/// Rewrites a note according to a hint. The returned edit is applied even
/// when the revision equals the current text.
pub async fn apply_suggestion(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    note: &NoteId,
    hint: &str,
) -> Result<MutationKind, AiError> {
    let text = note_text(state, note)?;
    let out = gw
        .complete_structured::<RevisionOutput>(
            TemplateId::ApplySuggestion,
            &vars([("note", text), ("hint", hint)]),
        )
        .await?;
    Ok(MutationKind::EditNoteText {
        note: note.clone(),
        text: out.value.revision.trim().to_string(),
    })
}

/// Creates a note from a hint, one unit right of its source note, or at the
/// origin when the source is gone.
pub fn add_hint_as_note(state: &WorkspaceState, hint: &str, source: Option<&NoteId>) -> MutationKind {
    let (position, page) = match source.and_then(|id| state.note(id)) {
        Some(n) => (n.position.offset(1.0, 0.0), n.page.clone()),
        None => (Position::ORIGIN, Page::Main),
    };
    MutationKind::CreateNote {
        id: None,
        text: hint.trim().to_string(),
        position,
        page,
        provenance: Provenance::ExpansionHint,
        group: None,
    }
}

pub async fn group_discussion_hints(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    group: &GroupId,
    instruction: Option<&str>,
) -> Result<Vec<IdeaHint>, AiError> {
    let g = state.group(group).ok_or_else(|| AiError::unknown("group", group))?;
    let members = KeyedNotes::new(g.member_notes.iter().filter_map(|id| state.note(id)));
    let ideas = if members.is_empty() {
        "[]".to_string()
    } else {
        members.describe_with_authors(state)
    };
    let out = gw
        .complete_structured::<HintsOutput>(
            TemplateId::GroupDiscussionHints,
            &vars([
                ("groupTitle", g.title.as_str()),
                ("ideas", ideas.as_str()),
                ("instruction", instruction.map(str::trim).unwrap_or("")),
            ]),
        )
        .await?;
    let kept = surface_hints(
        &out.value.hints,
        state.settings.confidence_threshold,
        Some(DISCUSSION_HINT_CAP),
    );
    Ok(to_hints(kept, IdeaHintKind::DiscussionHint, HintSource::Group(group.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(scores: &[f64]) -> Vec<ScoredText> {
        scores
            .iter()
            .enumerate()
            .map(|(i, s)| ScoredText {
                text: format!("h{i}"),
                score: *s,
            })
            .collect()
    }

    #[test]
    fn strict_threshold() {
        let kept = surface_hints(&scored(&[0.9, 0.6, 0.3]), 0.6, None);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);
    }

    #[test]
    fn cap_keeps_highest_with_provider_order_ties() {
        let kept = surface_hints(&scored(&[0.7, 0.95, 0.8, 0.8, 0.65]), 0.6, Some(3));
        let texts: Vec<_> = kept.iter().map(|h| h.text.as_str()).collect();
        assert_eq!(texts, ["h1", "h2", "h3"]);
    }
}
