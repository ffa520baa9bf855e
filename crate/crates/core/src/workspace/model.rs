//! Shared-workspace domain types.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::relation::RelationType;
use crate::ids::{GroupId, LensId, NoteId, RecordingId, UserId, WorkspaceId};

/// Monotone per-workspace mutation counter.
pub type Revision = u64;

pub const FORMAT_VERSION: u32 = 1;
pub const MAX_NOTE_CHARS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Which canvas page an item lives on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Page {
    #[default]
    Main,
    Lens(LensId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    #[default]
    Manual,
    GoalDecomposition,
    ExpansionHint,
    DiscussionExtraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Note {
    pub id: NoteId,
    pub author: UserId,
    pub text: String,
    pub position: Position,
    pub page: Page,
    pub group: Option<GroupId>,
    pub provenance: Provenance,
    pub created_at_revision: Revision,
    /// Last revision that changed the text; drives incremental regrouping.
    pub updated_at_revision: Revision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopicGroup {
    pub id: GroupId,
    pub title: String,
    pub page: Page,
    pub parent: Option<GroupId>,
    /// Direct members in insertion order.
    pub member_notes: Vec<NoteId>,
    pub rationale: Option<String>,
    pub position: Position,
    pub created_at_revision: Revision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkspaceSettings {
    pub relation_hints_enabled: bool,
    pub cross_user_only: bool,
    pub hint_refresh_interval_ms: u64,
    pub confidence_threshold: f64,
    pub similarity_threshold: f64,
    pub relevance_threshold: f64,
    pub max_hints_per_refresh: usize,
}

impl Default for WorkspaceSettings {
    fn default() -> Self {
        Self {
            relation_hints_enabled: false,
            cross_user_only: false,
            hint_refresh_interval_ms: 10_000,
            confidence_threshold: 0.6,
            similarity_threshold: 0.6,
            relevance_threshold: 0.6,
            max_hints_per_refresh: 10,
        }
    }
}

impl WorkspaceSettings {
    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("confidenceThreshold", self.confidence_threshold),
            ("similarityThreshold", self.similarity_threshold),
            ("relevanceThreshold", self.relevance_threshold),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(format!("{name} must lie in [0, 1], got {value}"));
            }
        }
        if self.hint_refresh_interval_ms == 0 {
            return Err("hintRefreshIntervalMs must be positive".into());
        }
        if self.max_hints_per_refresh == 0 {
            return Err("maxHintsPerRefresh must be at least 1".into());
        }
        Ok(())
    }
}

/// One suggested cluster inside a lens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Affinity {
    pub group_name: String,
    pub group_description: String,
}

impl Affinity {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            group_name: name.into(),
            group_description: description.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum LensScope {
    Global,
    Selected { notes: Vec<NoteId> },
    Customized { instruction: String },
}

/// A lens proposal that has not been installed yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LensCandidate {
    pub name: String,
    pub description: String,
    pub affinities: Vec<Affinity>,
    pub scope: LensScope,
    #[serde(default)]
    pub refinement_incomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AffinityLens {
    pub id: LensId,
    pub name: String,
    pub description: String,
    pub affinities: Vec<Affinity>,
    pub scope: LensScope,
    pub created_at_revision: Revision,
    pub refinement_incomplete: bool,
}

impl AffinityLens {
    pub fn from_candidate(id: LensId, candidate: LensCandidate) -> Self {
        Self {
            id,
            name: candidate.name,
            description: candidate.description,
            affinities: candidate.affinities,
            scope: candidate.scope,
            created_at_revision: 0,
            refinement_incomplete: candidate.refinement_incomplete,
        }
    }

    pub fn has_group(&self, name: &str) -> bool {
        self.affinities.iter().any(|a| a.group_name == name)
    }
}

/// Materialized grouping of one lens. `None` is the UNGROUPED bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LensPage {
    pub lens: LensId,
    pub assignment: BTreeMap<NoteId, Option<String>>,
    pub rationale: BTreeMap<String, String>,
    pub last_regroup_revision: Revision,
}

impl LensPage {
    /// Notes per group in lens order, followed by the UNGROUPED bucket.
    pub fn partition(&self, lens: &AffinityLens) -> (Vec<(String, Vec<NoteId>)>, Vec<NoteId>) {
        let groups = lens
            .affinities
            .iter()
            .map(|a| {
                let members = self
                    .assignment
                    .iter()
                    .filter(|(_, g)| g.as_deref() == Some(a.group_name.as_str()))
                    .map(|(n, _)| n.clone())
                    .collect();
                (a.group_name.clone(), members)
            })
            .collect();
        let ungrouped = self
            .assignment
            .iter()
            .filter(|(_, g)| g.is_none())
            .map(|(n, _)| n.clone())
            .collect();
        (groups, ungrouped)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RelationHint {
    pub source: NoteId,
    pub target: NoteId,
    pub relation_type: RelationType,
    pub explanation: String,
    pub confidence: f64,
    pub generated_at_revision: Revision,
}

impl RelationHint {
    /// Order-independent key of the note pair.
    pub fn pair(&self) -> (NoteId, NoteId) {
        unordered_pair(&self.source, &self.target)
    }
}

pub fn unordered_pair(a: &NoteId, b: &NoteId) -> (NoteId, NoteId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkspaceState {
    pub format_version: u32,
    pub id: WorkspaceId,
    pub revision: Revision,
    pub notes: BTreeMap<NoteId, Note>,
    pub groups: BTreeMap<GroupId, TopicGroup>,
    pub lenses: BTreeMap<LensId, AffinityLens>,
    pub lens_pages: BTreeMap<LensId, LensPage>,
    pub relation_hints: Vec<RelationHint>,
    pub settings: WorkspaceSettings,
    pub active_recording: Option<RecordingId>,
    /// Users in order of their first applied mutation; indexes the palette.
    pub participants: Vec<UserId>,
}

impl WorkspaceState {
    pub fn new(id: WorkspaceId) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            id,
            revision: 0,
            notes: BTreeMap::new(),
            groups: BTreeMap::new(),
            lenses: BTreeMap::new(),
            lens_pages: BTreeMap::new(),
            relation_hints: Vec::new(),
            settings: WorkspaceSettings::default(),
            active_recording: None,
            participants: Vec::new(),
        }
    }

    pub fn note(&self, id: &NoteId) -> Option<&Note> {
        self.notes.get(id)
    }

    pub fn group(&self, id: &GroupId) -> Option<&TopicGroup> {
        self.groups.get(id)
    }

    /// MAIN-page notes in creation order (ties broken by id).
    pub fn main_notes(&self) -> Vec<&Note> {
        let mut notes: Vec<&Note> = self.notes.values().filter(|n| n.page == Page::Main).collect();
        notes.sort_by(|a, b| {
            a.created_at_revision
                .cmp(&b.created_at_revision)
                .then_with(|| a.id.cmp(&b.id))
        });
        notes
    }

    pub fn lens_by_name(&self, name: &str) -> Option<&AffinityLens> {
        let key = name.trim().to_lowercase();
        self.lenses.values().find(|l| l.name.trim().to_lowercase() == key)
    }

    /// Notes currently covered by a lens scope.
    pub fn scope_notes(&self, scope: &LensScope) -> Vec<&Note> {
        match scope {
            LensScope::Global | LensScope::Customized { .. } => self.main_notes(),
            LensScope::Selected { notes } => self
                .main_notes()
                .into_iter()
                .filter(|n| notes.contains(&n.id))
                .collect(),
        }
    }

    /// All strict descendants of `group`, children before their own children.
    pub fn descendants(&self, group: &GroupId) -> Vec<GroupId> {
        let mut out = Vec::new();
        let mut frontier = vec![group.clone()];
        while let Some(current) = frontier.pop() {
            for g in self.groups.values() {
                if g.parent.as_ref() == Some(&current) {
                    out.push(g.id.clone());
                    frontier.push(g.id.clone());
                }
            }
        }
        out
    }

    /// Verifies every structural invariant; used after deserialization and
    /// by property tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!("unsupported formatVersion {}", self.format_version));
        }
        self.settings.validate()?;
        let page_ok = |page: &Page| match page {
            Page::Main => true,
            Page::Lens(l) => self.lenses.contains_key(l),
        };

        for (id, note) in &self.notes {
            if &note.id != id {
                return Err(format!("note key {id} does not match id {}", note.id));
            }
            if note.text.trim().is_empty() {
                return Err(format!("note {id} has empty text"));
            }
            if note.text.chars().count() > MAX_NOTE_CHARS {
                return Err(format!("note {id} exceeds {MAX_NOTE_CHARS} characters"));
            }
            if !page_ok(&note.page) {
                return Err(format!("note {id} is on a missing page"));
            }
            if let Some(g) = &note.group {
                let group = self
                    .groups
                    .get(g)
                    .ok_or_else(|| format!("note {id} references missing group {g}"))?;
                if group.page != note.page {
                    return Err(format!("note {id} and group {g} are on different pages"));
                }
                if !group.member_notes.contains(id) {
                    return Err(format!("group {g} does not list member {id}"));
                }
            }
        }

        let mut seen_members = std::collections::BTreeSet::new();
        for (id, group) in &self.groups {
            if &group.id != id {
                return Err(format!("group key {id} does not match id {}", group.id));
            }
            if !page_ok(&group.page) {
                return Err(format!("group {id} is on a missing page"));
            }
            for member in &group.member_notes {
                let note = self
                    .notes
                    .get(member)
                    .ok_or_else(|| format!("group {id} lists missing note {member}"))?;
                if note.group.as_ref() != Some(id) {
                    return Err(format!("note {member} does not point back to group {id}"));
                }
                if !seen_members.insert(member.clone()) {
                    return Err(format!("note {member} belongs to more than one group"));
                }
            }
            if let Some(parent) = &group.parent {
                let p = self
                    .groups
                    .get(parent)
                    .ok_or_else(|| format!("group {id} has missing parent {parent}"))?;
                if p.page != group.page {
                    return Err(format!("group {id} and its parent are on different pages"));
                }
            }
            // Walk up; a chain longer than the group count means a cycle.
            let mut cursor = group.parent.clone();
            let mut steps = 0;
            while let Some(p) = cursor {
                steps += 1;
                if steps > self.groups.len() {
                    return Err(format!("parent chain of group {id} is cyclic"));
                }
                cursor = self.groups.get(&p).and_then(|g| g.parent.clone());
            }
        }

        for (id, lens) in &self.lenses {
            if &lens.id != id {
                return Err(format!("lens key {id} does not match id {}", lens.id));
            }
            if lens.affinities.len() < 2 {
                return Err(format!("lens {id} has fewer than two affinities"));
            }
            if let LensScope::Selected { notes } = &lens.scope {
                if let Some(missing) = notes.iter().find(|n| !self.notes.contains_key(*n)) {
                    return Err(format!("lens {id} scope references missing note {missing}"));
                }
            }
            let page = self
                .lens_pages
                .get(id)
                .ok_or_else(|| format!("lens {id} has no page"))?;
            if &page.lens != id {
                return Err(format!("lens page {id} points at {}", page.lens));
            }
        }
        for (id, page) in &self.lens_pages {
            let lens = self
                .lenses
                .get(id)
                .ok_or_else(|| format!("lens page {id} has no lens"))?;
            for (note, group) in &page.assignment {
                if !self.notes.contains_key(note) {
                    return Err(format!("lens page {id} assigns missing note {note}"));
                }
                if let Some(g) = group {
                    if !lens.has_group(g) {
                        return Err(format!("lens page {id} uses unknown group {g}"));
                    }
                }
            }
        }

        let mut pairs = std::collections::BTreeSet::new();
        if self.relation_hints.len() > self.settings.max_hints_per_refresh {
            return Err("more relation hints than maxHintsPerRefresh".into());
        }
        for hint in &self.relation_hints {
            if hint.source == hint.target {
                return Err(format!("relation hint on {} points at itself", hint.source));
            }
            if !self.notes.contains_key(&hint.source) || !self.notes.contains_key(&hint.target) {
                return Err("relation hint references a missing note".into());
            }
            if !(hint.confidence >= self.settings.confidence_threshold && hint.confidence <= 1.0) {
                return Err(format!("relation hint confidence {} out of range", hint.confidence));
            }
            if !pairs.insert(hint.pair()) {
                return Err("two relation hints share a note pair".into());
            }
        }
        Ok(())
    }
}
