//! The single authoritative mutation path.
//!
//! [`apply_mutation`] is a pure function of `(state, mutation)`: it never
//! reads the clock or mints identifiers. Creates must arrive with their
//! identifiers already stamped (the sequencer does that), so replaying a
//! mutation log reproduces the final state exactly.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::model::*;
use crate::ids::{GroupId, LensId, NoteId, RecordingId, UserId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum MutationKind {
    CreateNote {
        #[serde(default)]
        id: Option<NoteId>,
        text: String,
        #[serde(default)]
        position: Position,
        #[serde(default)]
        page: Page,
        #[serde(default)]
        provenance: Provenance,
        #[serde(default)]
        group: Option<GroupId>,
    },
    EditNoteText {
        note: NoteId,
        text: String,
    },
    MoveNote {
        note: NoteId,
        position: Position,
    },
    DeleteNote {
        note: NoteId,
    },
    CreateGroup {
        #[serde(default)]
        id: Option<GroupId>,
        title: String,
        #[serde(default)]
        page: Page,
        #[serde(default)]
        parent: Option<GroupId>,
        #[serde(default)]
        position: Position,
        #[serde(default)]
        rationale: Option<String>,
        #[serde(default)]
        members: Vec<NoteId>,
    },
    RenameGroup {
        group: GroupId,
        title: String,
    },
    AssignNoteToGroup {
        note: NoteId,
        group: GroupId,
    },
    RemoveNoteFromGroup {
        note: NoteId,
    },
    PromoteSubgroup {
        group: GroupId,
    },
    DeleteGroup {
        group: GroupId,
    },
    SetSettings {
        settings: WorkspaceSettings,
    },
    InstallLensPage {
        lens: AffinityLens,
        page: LensPage,
    },
    ReplaceGrouping {
        lens: LensId,
        assignment: BTreeMap<NoteId, Option<String>>,
        #[serde(default)]
        rationale: BTreeMap<String, String>,
        regrouped_at_revision: Revision,
    },
    DeleteLens {
        lens: LensId,
    },
    ReplaceRelationHints {
        hints: Vec<RelationHint>,
    },
    SetRecording {
        recording: Option<RecordingId>,
    },
    /// Snapshot rollback: content is replaced wholesale, the revision
    /// counter keeps advancing.
    RestoreState {
        state: Box<WorkspaceState>,
    },
}

impl MutationKind {
    pub fn name(&self) -> &'static str {
        match self {
            MutationKind::CreateNote { .. } => "createNote",
            MutationKind::EditNoteText { .. } => "editNoteText",
            MutationKind::MoveNote { .. } => "moveNote",
            MutationKind::DeleteNote { .. } => "deleteNote",
            MutationKind::CreateGroup { .. } => "createGroup",
            MutationKind::RenameGroup { .. } => "renameGroup",
            MutationKind::AssignNoteToGroup { .. } => "assignNoteToGroup",
            MutationKind::RemoveNoteFromGroup { .. } => "removeNoteFromGroup",
            MutationKind::PromoteSubgroup { .. } => "promoteSubgroup",
            MutationKind::DeleteGroup { .. } => "deleteGroup",
            MutationKind::SetSettings { .. } => "setSettings",
            MutationKind::InstallLensPage { .. } => "installLensPage",
            MutationKind::ReplaceGrouping { .. } => "replaceGrouping",
            MutationKind::DeleteLens { .. } => "deleteLens",
            MutationKind::ReplaceRelationHints { .. } => "replaceRelationHints",
            MutationKind::SetRecording { .. } => "setRecording",
            MutationKind::RestoreState { .. } => "restoreState",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Mutation {
    pub actor: UserId,
    pub op: MutationKind,
}

impl Mutation {
    pub fn new(actor: UserId, op: MutationKind) -> Self {
        Self { actor, op }
    }
}

/// Actor used for engine-initiated mutations (relation-hint refresh).
pub fn system_actor() -> UserId {
    UserId::new("@system")
}

/// Observable changes produced by one mutation, in application order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Event {
    NoteCreated { note: NoteId },
    NoteTextEdited { note: NoteId, previous: String, text: String },
    NoteMoved { note: NoteId, position: Position },
    NoteDeleted { note: NoteId },
    GroupCreated { group: GroupId },
    GroupRenamed { group: GroupId, title: String },
    NoteGrouped { note: NoteId, group: GroupId, previous: Option<GroupId> },
    NoteUngrouped { note: NoteId, group: GroupId },
    SubgroupPromoted { group: GroupId, former_parent: GroupId },
    GroupDeleted { group: GroupId },
    SettingsChanged,
    LensInstalled { lens: LensId },
    GroupingReplaced { lens: LensId },
    LensDeleted { lens: LensId },
    RelationHintsReplaced { count: usize },
    RecordingChanged { recording: Option<RecordingId> },
    StateRestored,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkspaceError {
    #[error("unknown {kind}: {id}")]
    UnknownReference { kind: &'static str, id: String },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("note text is empty")]
    EmptyText,
    #[error("note text is {0} characters; the limit is {MAX_NOTE_CHARS}")]
    TextTooLong(usize),
    #[error("group {0} is not a subgroup")]
    NotASubgroup(GroupId),
    #[error("a lens named {0:?} already exists")]
    DuplicateLensName(String),
}

impl WorkspaceError {
    /// Stable code carried in wire `error` messages.
    pub fn code(&self) -> &'static str {
        match self {
            WorkspaceError::UnknownReference { .. } => "UnknownReference",
            WorkspaceError::InvariantViolation(_) => "InvariantViolation",
            WorkspaceError::EmptyText => "EmptyText",
            WorkspaceError::TextTooLong(_) => "TextTooLong",
            WorkspaceError::NotASubgroup(_) => "NotASubgroup",
            WorkspaceError::DuplicateLensName(_) => "DuplicateLensName",
        }
    }

    fn unknown_note(id: &NoteId) -> Self {
        WorkspaceError::UnknownReference {
            kind: "note",
            id: id.to_string(),
        }
    }

    fn unknown_group(id: &GroupId) -> Self {
        WorkspaceError::UnknownReference {
            kind: "group",
            id: id.to_string(),
        }
    }

    fn unknown_lens(id: &LensId) -> Self {
        WorkspaceError::UnknownReference {
            kind: "lens",
            id: id.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, WorkspaceError>;

/// Applies `m` to `state`, returning the next state and its events.
/// `state` itself is left untouched.
pub fn apply_mutation(state: &WorkspaceState, m: &Mutation) -> Result<(WorkspaceState, Vec<Event>)> {
    let mut next = state.clone();
    let events = next.apply(m)?;
    Ok((next, events))
}

fn check_text(text: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(WorkspaceError::EmptyText);
    }
    let len = text.chars().count();
    if len > MAX_NOTE_CHARS {
        return Err(WorkspaceError::TextTooLong(len));
    }
    Ok(())
}

fn check_position(position: Position) -> Result<()> {
    if position.is_finite() {
        Ok(())
    } else {
        Err(WorkspaceError::InvariantViolation(
            "positions must be finite".into(),
        ))
    }
}

impl WorkspaceState {
    /// In-place variant of [`apply_mutation`]. On error the state is unchanged.
    pub fn apply(&mut self, m: &Mutation) -> Result<Vec<Event>> {
        let mut next = self.clone();
        let revision = self.revision + 1;
        let events = next.apply_op(&m.actor, &m.op, revision)?;
        next.revision = revision;
        if !m.actor.as_str().starts_with('@') && !next.participants.contains(&m.actor) {
            next.participants.push(m.actor.clone());
        }
        *self = next;
        Ok(events)
    }

    fn page_exists(&self, page: &Page) -> Result<()> {
        match page {
            Page::Main => Ok(()),
            Page::Lens(l) if self.lenses.contains_key(l) => Ok(()),
            Page::Lens(l) => Err(WorkspaceError::unknown_lens(l)),
        }
    }

    fn detach_note(&mut self, note: &NoteId) -> Option<GroupId> {
        let previous = self.notes.get_mut(note)?.group.take()?;
        if let Some(group) = self.groups.get_mut(&previous) {
            group.member_notes.retain(|n| n != note);
        }
        Some(previous)
    }

    fn attach_note(&mut self, note: &NoteId, group: &GroupId) -> Result<Option<GroupId>> {
        let note_page = &self
            .notes
            .get(note)
            .ok_or_else(|| WorkspaceError::unknown_note(note))?
            .page;
        let target = self
            .groups
            .get(group)
            .ok_or_else(|| WorkspaceError::unknown_group(group))?;
        if &target.page != note_page {
            return Err(WorkspaceError::InvariantViolation(format!(
                "note {note} and group {group} are on different pages"
            )));
        }
        let previous = self.detach_note(note);
        self.groups
            .get_mut(group)
            .expect("checked above")
            .member_notes
            .push(note.clone());
        self.notes.get_mut(note).expect("checked above").group = Some(group.clone());
        Ok(previous)
    }

    fn check_parent(&self, parent: &Option<GroupId>, page: &Page) -> Result<()> {
        if let Some(p) = parent {
            let pg = self.groups.get(p).ok_or_else(|| WorkspaceError::unknown_group(p))?;
            if &pg.page != page {
                return Err(WorkspaceError::InvariantViolation(format!(
                    "parent group {p} is on a different page"
                )));
            }
        }
        Ok(())
    }

    /// Drops assignment entries for vanished notes and rejects group names
    /// the lens does not define. Grouping results are computed against an
    /// older revision, so notes deleted in the meantime are expected.
    fn sanitize_assignment(
        &self,
        lens: &AffinityLens,
        assignment: &BTreeMap<NoteId, Option<String>>,
    ) -> Result<BTreeMap<NoteId, Option<String>>> {
        let mut out = BTreeMap::new();
        for (note, group) in assignment {
            if !self.notes.contains_key(note) {
                continue;
            }
            if let Some(g) = group {
                if !lens.has_group(g) {
                    return Err(WorkspaceError::InvariantViolation(format!(
                        "lens {} has no group named {g:?}",
                        lens.id
                    )));
                }
            }
            out.insert(note.clone(), group.clone());
        }
        Ok(out)
    }

    fn apply_op(&mut self, actor: &UserId, op: &MutationKind, revision: Revision) -> Result<Vec<Event>> {
        let mut events = Vec::new();
        match op {
            MutationKind::CreateNote {
                id,
                text,
                position,
                page,
                provenance,
                group,
            } => {
                let id = id.clone().ok_or_else(|| {
                    WorkspaceError::InvariantViolation("note identifier was not assigned".into())
                })?;
                if self.notes.contains_key(&id) {
                    return Err(WorkspaceError::InvariantViolation(format!(
                        "note identifier {id} is already in use"
                    )));
                }
                check_text(text)?;
                check_position(*position)?;
                self.page_exists(page)?;
                self.notes.insert(
                    id.clone(),
                    Note {
                        id: id.clone(),
                        author: actor.clone(),
                        text: text.clone(),
                        position: *position,
                        page: page.clone(),
                        group: None,
                        provenance: *provenance,
                        created_at_revision: revision,
                        updated_at_revision: revision,
                    },
                );
                events.push(Event::NoteCreated { note: id.clone() });
                if let Some(g) = group {
                    self.attach_note(&id, g)?;
                    events.push(Event::NoteGrouped {
                        note: id,
                        group: g.clone(),
                        previous: None,
                    });
                }
            }
            MutationKind::EditNoteText { note, text } => {
                check_text(text)?;
                let n = self
                    .notes
                    .get_mut(note)
                    .ok_or_else(|| WorkspaceError::unknown_note(note))?;
                let previous = std::mem::replace(&mut n.text, text.clone());
                n.updated_at_revision = revision;
                events.push(Event::NoteTextEdited {
                    note: note.clone(),
                    previous,
                    text: text.clone(),
                });
            }
            MutationKind::MoveNote { note, position } => {
                check_position(*position)?;
                let n = self
                    .notes
                    .get_mut(note)
                    .ok_or_else(|| WorkspaceError::unknown_note(note))?;
                n.position = *position;
                events.push(Event::NoteMoved {
                    note: note.clone(),
                    position: *position,
                });
            }
            MutationKind::DeleteNote { note } => {
                if !self.notes.contains_key(note) {
                    return Err(WorkspaceError::unknown_note(note));
                }
                self.detach_note(note);
                self.notes.remove(note);
                // Removed everywhere: lens pages, lens scopes and hints.
                for page in self.lens_pages.values_mut() {
                    page.assignment.remove(note);
                }
                for lens in self.lenses.values_mut() {
                    if let LensScope::Selected { notes } = &mut lens.scope {
                        notes.retain(|n| n != note);
                    }
                }
                self.relation_hints
                    .retain(|h| &h.source != note && &h.target != note);
                events.push(Event::NoteDeleted { note: note.clone() });
            }
            MutationKind::CreateGroup {
                id,
                title,
                page,
                parent,
                position,
                rationale,
                members,
            } => {
                let id = id.clone().ok_or_else(|| {
                    WorkspaceError::InvariantViolation("group identifier was not assigned".into())
                })?;
                if self.groups.contains_key(&id) {
                    return Err(WorkspaceError::InvariantViolation(format!(
                        "group identifier {id} is already in use"
                    )));
                }
                if title.trim().is_empty() {
                    return Err(WorkspaceError::EmptyText);
                }
                check_position(*position)?;
                self.page_exists(page)?;
                self.check_parent(parent, page)?;
                self.groups.insert(
                    id.clone(),
                    TopicGroup {
                        id: id.clone(),
                        title: title.clone(),
                        page: page.clone(),
                        parent: parent.clone(),
                        member_notes: Vec::new(),
                        rationale: rationale.clone(),
                        position: *position,
                        created_at_revision: revision,
                    },
                );
                events.push(Event::GroupCreated { group: id.clone() });
                for note in members {
                    let previous = self.attach_note(note, &id)?;
                    events.push(Event::NoteGrouped {
                        note: note.clone(),
                        group: id.clone(),
                        previous,
                    });
                }
            }
            MutationKind::RenameGroup { group, title } => {
                if title.trim().is_empty() {
                    return Err(WorkspaceError::EmptyText);
                }
                let g = self
                    .groups
                    .get_mut(group)
                    .ok_or_else(|| WorkspaceError::unknown_group(group))?;
                g.title = title.clone();
                events.push(Event::GroupRenamed {
                    group: group.clone(),
                    title: title.clone(),
                });
            }
            MutationKind::AssignNoteToGroup { note, group } => {
                let previous = self.attach_note(note, group)?;
                events.push(Event::NoteGrouped {
                    note: note.clone(),
                    group: group.clone(),
                    previous,
                });
            }
            MutationKind::RemoveNoteFromGroup { note } => {
                if !self.notes.contains_key(note) {
                    return Err(WorkspaceError::unknown_note(note));
                }
                if let Some(group) = self.detach_note(note) {
                    events.push(Event::NoteUngrouped {
                        note: note.clone(),
                        group,
                    });
                }
            }
            MutationKind::PromoteSubgroup { group } => {
                let g = self
                    .groups
                    .get_mut(group)
                    .ok_or_else(|| WorkspaceError::unknown_group(group))?;
                let former_parent = g
                    .parent
                    .take()
                    .ok_or_else(|| WorkspaceError::NotASubgroup(group.clone()))?;
                events.push(Event::SubgroupPromoted {
                    group: group.clone(),
                    former_parent,
                });
            }
            MutationKind::DeleteGroup { group } => {
                let removed = self
                    .groups
                    .remove(group)
                    .ok_or_else(|| WorkspaceError::unknown_group(group))?;
                for note in &removed.member_notes {
                    if let Some(n) = self.notes.get_mut(note) {
                        n.group = None;
                    }
                }
                for g in self.groups.values_mut() {
                    if g.parent.as_ref() == Some(group) {
                        g.parent = removed.parent.clone();
                    }
                }
                events.push(Event::GroupDeleted {
                    group: group.clone(),
                });
            }
            MutationKind::SetSettings { settings } => {
                settings.validate().map_err(WorkspaceError::InvariantViolation)?;
                if !settings.relation_hints_enabled {
                    self.relation_hints.clear();
                }
                self.settings = settings.clone();
                self.relation_hints
                    .retain(|h| h.confidence >= settings.confidence_threshold);
                self.relation_hints.truncate(settings.max_hints_per_refresh);
                events.push(Event::SettingsChanged);
            }
            MutationKind::InstallLensPage { lens, page } => {
                if self.lenses.contains_key(&lens.id) {
                    return Err(WorkspaceError::InvariantViolation(format!(
                        "lens identifier {} is already in use",
                        lens.id
                    )));
                }
                if self.lens_by_name(&lens.name).is_some() {
                    return Err(WorkspaceError::DuplicateLensName(lens.name.clone()));
                }
                if lens.affinities.len() < 2 {
                    return Err(WorkspaceError::InvariantViolation(
                        "a lens needs at least two affinities".into(),
                    ));
                }
                if page.lens != lens.id {
                    return Err(WorkspaceError::InvariantViolation(
                        "lens page does not belong to the lens".into(),
                    ));
                }
                let mut lens = lens.clone();
                lens.created_at_revision = revision;
                if let LensScope::Selected { notes } = &mut lens.scope {
                    notes.retain(|n| self.notes.contains_key(n));
                }
                let assignment = self.sanitize_assignment(&lens, &page.assignment)?;
                let rationale = page
                    .rationale
                    .iter()
                    .filter(|(g, _)| lens.has_group(g))
                    .map(|(g, r)| (g.clone(), r.clone()))
                    .collect();
                self.lens_pages.insert(
                    lens.id.clone(),
                    LensPage {
                        lens: lens.id.clone(),
                        assignment,
                        rationale,
                        last_regroup_revision: page.last_regroup_revision,
                    },
                );
                events.push(Event::LensInstalled {
                    lens: lens.id.clone(),
                });
                self.lenses.insert(lens.id.clone(), lens);
            }
            MutationKind::ReplaceGrouping {
                lens,
                assignment,
                rationale,
                regrouped_at_revision,
            } => {
                let l = self
                    .lenses
                    .get(lens)
                    .ok_or_else(|| WorkspaceError::unknown_lens(lens))?;
                let assignment = self.sanitize_assignment(l, assignment)?;
                let rationale = rationale
                    .iter()
                    .filter(|(g, _)| l.has_group(g))
                    .map(|(g, r)| (g.clone(), r.clone()))
                    .collect();
                let page = self.lens_pages.get_mut(lens).expect("lens has a page");
                page.assignment = assignment;
                page.rationale = rationale;
                page.last_regroup_revision = *regrouped_at_revision;
                events.push(Event::GroupingReplaced { lens: lens.clone() });
            }
            MutationKind::DeleteLens { lens } => {
                if self.lenses.remove(lens).is_none() {
                    return Err(WorkspaceError::unknown_lens(lens));
                }
                self.lens_pages.remove(lens);
                let page = Page::Lens(lens.clone());
                let doomed: BTreeSet<NoteId> = self
                    .notes
                    .values()
                    .filter(|n| n.page == page)
                    .map(|n| n.id.clone())
                    .collect();
                self.notes.retain(|_, n| n.page != page);
                self.groups.retain(|_, g| g.page != page);
                self.relation_hints
                    .retain(|h| !doomed.contains(&h.source) && !doomed.contains(&h.target));
                events.push(Event::LensDeleted { lens: lens.clone() });
            }
            MutationKind::ReplaceRelationHints { hints } => {
                let mut kept = Vec::with_capacity(hints.len());
                let mut pairs = BTreeSet::new();
                for hint in hints {
                    if !self.notes.contains_key(&hint.source) || !self.notes.contains_key(&hint.target) {
                        continue;
                    }
                    if hint.source == hint.target {
                        return Err(WorkspaceError::InvariantViolation(
                            "a relation hint cannot relate a note to itself".into(),
                        ));
                    }
                    if !(hint.confidence >= self.settings.confidence_threshold
                        && hint.confidence <= 1.0)
                    {
                        return Err(WorkspaceError::InvariantViolation(format!(
                            "relation hint confidence {} is below the threshold",
                            hint.confidence
                        )));
                    }
                    if !pairs.insert(hint.pair()) {
                        return Err(WorkspaceError::InvariantViolation(
                            "duplicate relation hint for one note pair".into(),
                        ));
                    }
                    kept.push(hint.clone());
                }
                if kept.len() > self.settings.max_hints_per_refresh {
                    return Err(WorkspaceError::InvariantViolation(format!(
                        "{} relation hints exceed the limit of {}",
                        kept.len(),
                        self.settings.max_hints_per_refresh
                    )));
                }
                events.push(Event::RelationHintsReplaced { count: kept.len() });
                self.relation_hints = kept;
            }
            MutationKind::SetRecording { recording } => {
                if recording.is_some() && self.active_recording.is_some() {
                    return Err(WorkspaceError::InvariantViolation(
                        "a recording is already active".into(),
                    ));
                }
                self.active_recording = recording.clone();
                events.push(Event::RecordingChanged {
                    recording: recording.clone(),
                });
            }
            MutationKind::RestoreState { state } => {
                state
                    .check_invariants()
                    .map_err(WorkspaceError::InvariantViolation)?;
                let id = self.id.clone();
                *self = (**state).clone();
                self.id = id;
                self.active_recording = None;
                events.push(Event::StateRestored);
            }
        }
        Ok(events)
    }
}
