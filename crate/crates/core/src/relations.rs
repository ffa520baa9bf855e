//! Relation hints between notes: generation, filtering, and the periodic
//! refresh schedule.

use std::collections::HashMap;

use crate::error::AiError;
use crate::gateway::schema::{RawRelation, RelationsOutput};
use crate::gateway::{vars, ScopedGateway, TemplateId};
use crate::ids::{NoteId, UserId};
use crate::keyed::KeyedNotes;
use crate::workspace::{
    unordered_pair, MutationKind, RelationHint, RelationType, Revision, WorkspaceSettings,
    WorkspaceState,
};

pub const MIN_NOTES: usize = 2;

/// A provider candidate with its note keys already resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub source: NoteId,
    pub target: NoteId,
    pub relation_type: String,
    pub explanation: String,
    pub confidence: f64,
}

/// Applies the hint rules to provider candidates, in this order: drop
/// self-pairs, types outside the catalog, confidence below the threshold and
/// (in cross-user mode) same-author pairs; then keep the most confident
/// candidate per unordered pair (earlier wins ties); then order by
/// confidence and cut to `max_hints_per_refresh`.
pub fn filter_candidates<'a>(
    candidates: &[Candidate],
    settings: &WorkspaceSettings,
    author_of: impl Fn(&NoteId) -> Option<&'a UserId>,
    revision: Revision,
) -> Vec<RelationHint> {
    let mut best: Vec<RelationHint> = Vec::new();
    let mut slot: HashMap<(NoteId, NoteId), usize> = HashMap::new();
    for c in candidates {
        if c.source == c.target || !c.confidence.is_finite() {
            continue;
        }
        let Some(relation_type) = RelationType::parse(&c.relation_type) else {
            continue;
        };
        if c.confidence < settings.confidence_threshold {
            continue;
        }
        let (Some(a), Some(b)) = (author_of(&c.source), author_of(&c.target)) else {
            continue;
        };
        if settings.cross_user_only && a == b {
            continue;
        }
        let hint = RelationHint {
            source: c.source.clone(),
            target: c.target.clone(),
            relation_type,
            explanation: c.explanation.trim().to_string(),
            confidence: c.confidence,
            generated_at_revision: revision,
        };
        match slot.get(&unordered_pair(&c.source, &c.target)) {
            Some(&i) if best[i].confidence >= hint.confidence => {}
            Some(&i) => best[i] = hint,
            None => {
                slot.insert(hint.pair(), best.len());
                best.push(hint);
            }
        }
    }
    best.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    best.truncate(settings.max_hints_per_refresh);
    best
}

fn resolve(keyed: &KeyedNotes, raw: &[RawRelation]) -> Vec<Candidate> {
    raw.iter()
        .filter_map(|r| {
            Some(Candidate {
                source: keyed.resolve(&r.source)?.clone(),
                target: keyed.resolve(&r.target)?.clone(),
                relation_type: r.relation_type.clone(),
                explanation: r.explanation.clone(),
                confidence: r.confidence,
            })
        })
        .collect()
}

/// Asks the provider for relations among the main-page notes and filters
/// them with the workspace's current settings.
pub async fn generate_hints(
    gw: &ScopedGateway,
    state: &WorkspaceState,
) -> Result<Vec<RelationHint>, AiError> {
    let notes = state.main_notes();
    if notes.len() < MIN_NOTES {
        return Err(AiError::TooFewNotes {
            needed: MIN_NOTES,
            found: notes.len(),
        });
    }
    let keyed = KeyedNotes::new(notes);
    let out = gw
        .complete_structured::<RelationsOutput>(
            TemplateId::RelationHints,
            &vars([("notes", keyed.describe_with_authors(state))]),
        )
        .await?;
    let candidates = resolve(&keyed, &out.value.relations);
    Ok(filter_candidates(
        &candidates,
        &state.settings,
        |id| state.note(id).map(|n| &n.author),
        state.revision,
    ))
}

/// Settings change that turns hints on or off. Turning them off clears the
/// current hint set.
pub fn toggle_hints(state: &WorkspaceState, enabled: bool, cross_user_only: bool) -> MutationKind {
    MutationKind::SetSettings {
        settings: WorkspaceSettings {
            relation_hints_enabled: enabled,
            cross_user_only,
            ..state.settings.clone()
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickDecision {
    Disabled,
    NotDue,
    /// Due, but nothing changed since the last successful refresh.
    Unchanged,
    /// Due; generate against this revision.
    Generate(Revision),
}

/// Decides when to refresh relation hints. Attempts happen at fixed
/// multiples of the interval from the moment hints were enabled; a due
/// attempt is skipped without a provider call when the workspace revision
/// still equals the one produced by the last successful refresh.
#[derive(Debug, Clone, Default)]
pub struct HintScheduler {
    interval_ms: u64,
    next_due: Option<u64>,
    refreshed_at_revision: Option<Revision>,
    in_flight: bool,
    attempts: Vec<u64>,
}

impl HintScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn poll(&mut self, now_ms: u64, state: &WorkspaceState) -> TickDecision {
        let settings = &state.settings;
        if !settings.relation_hints_enabled {
            self.next_due = None;
            self.refreshed_at_revision = None;
            return TickDecision::Disabled;
        }
        if settings.hint_refresh_interval_ms != self.interval_ms {
            self.interval_ms = settings.hint_refresh_interval_ms;
            if self.next_due.is_some() {
                self.next_due = Some(now_ms + self.interval_ms);
            }
        }
        let due = *self.next_due.get_or_insert(now_ms);
        if now_ms < due {
            return TickDecision::NotDue;
        }
        let behind = (now_ms - due) / self.interval_ms;
        self.next_due = Some(due + (behind + 1) * self.interval_ms);
        if self.in_flight {
            // The previous refresh is still running; this slot is skipped.
            return TickDecision::NotDue;
        }
        self.attempts.push(now_ms);
        if self.refreshed_at_revision == Some(state.revision) {
            return TickDecision::Unchanged;
        }
        self.in_flight = true;
        TickDecision::Generate(state.revision)
    }

    /// The hint replacement was applied and produced `applied_revision`.
    pub fn succeeded(&mut self, applied_revision: Revision) {
        self.in_flight = false;
        self.refreshed_at_revision = Some(applied_revision);
    }

    /// Generation or application failed; the previous hints stay.
    pub fn failed(&mut self) {
        self.in_flight = false;
    }

    pub fn next_due(&self) -> Option<u64> {
        self.next_due
    }

    /// Times (ms) of every due tick, including skipped ones.
    pub fn attempts(&self) -> &[u64] {
        &self.attempts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::WorkspaceId;
    use crate::workspace::{Mutation, MutationKind as K};

    fn cand(s: &str, t: &str, ty: &str, c: f64) -> Candidate {
        Candidate {
            source: NoteId::new(s),
            target: NoteId::new(t),
            relation_type: ty.into(),
            explanation: String::new(),
            confidence: c,
        }
    }

    fn authors(id: &NoteId) -> Option<&'static UserId> {
        static U1: std::sync::OnceLock<UserId> = std::sync::OnceLock::new();
        static U2: std::sync::OnceLock<UserId> = std::sync::OnceLock::new();
        match id.as_str() {
            "n1" | "n2" => Some(U1.get_or_init(|| UserId::new("u1"))),
            "n3" => Some(U2.get_or_init(|| UserId::new("u2"))),
            _ => None,
        }
    }

    #[test]
    fn threshold_and_catalog() {
        let out = filter_candidates(
            &[cand("n1", "n2", "Causes", 0.9), cand("n1", "n3", "Part of", 0.4), cand("n2", "n3", "Related to", 0.95)],
            &WorkspaceSettings::default(),
            authors,
            4,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].relation_type, RelationType::Causes);
        assert_eq!(out[0].generated_at_revision, 4);
    }

    #[test]
    fn pair_dedup_keeps_most_confident() {
        let out = filter_candidates(
            &[cand("n1", "n2", "Causes", 0.7), cand("n2", "n1", "Desires", 0.8)],
            &WorkspaceSettings::default(),
            authors,
            0,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].relation_type, RelationType::Desires);
        assert_eq!(out[0].confidence, 0.8);
    }

    #[test]
    fn cross_user_only() {
        let settings = WorkspaceSettings {
            cross_user_only: true,
            ..Default::default()
        };
        let out = filter_candidates(
            &[cand("n1", "n2", "Causes", 0.9), cand("n1", "n3", "Causes", 0.9)],
            &settings,
            authors,
            0,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].target, NoteId::new("n3"));
    }

    fn enabled_state() -> WorkspaceState {
        let mut s = WorkspaceState::new(WorkspaceId::new("w"));
        let mut settings = s.settings.clone();
        settings.relation_hints_enabled = true;
        s.apply(&Mutation::new(UserId::new("u"), K::SetSettings { settings }))
            .unwrap();
        s
    }

    #[test]
    fn scheduler_fires_on_interval_and_skips_unchanged() {
        let state = enabled_state();
        let mut sched = HintScheduler::new();
        assert_eq!(sched.poll(500, &state), TickDecision::Generate(1));
        sched.succeeded(1);
        assert_eq!(sched.poll(10_499, &state), TickDecision::NotDue);
        assert_eq!(sched.poll(10_500, &state), TickDecision::Unchanged);
        assert_eq!(sched.poll(35_000, &state), TickDecision::Unchanged);
        assert_eq!(sched.attempts(), &[500, 10_500, 35_000]);
        assert_eq!(sched.next_due(), Some(40_500));
    }

    #[test]
    fn scheduler_resets_when_disabled() {
        let mut state = enabled_state();
        let mut sched = HintScheduler::new();
        assert!(matches!(sched.poll(0, &state), TickDecision::Generate(_)));
        sched.failed();
        state.settings.relation_hints_enabled = false;
        assert_eq!(sched.poll(10_000, &state), TickDecision::Disabled);
        assert_eq!(sched.next_due(), None);
    }
}
