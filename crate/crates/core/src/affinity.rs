//! Affinity lenses: proposing ways to group ideas, refining group names
//! until they are distinct, materializing exclusive groupings on lens pages,
//! keeping those pages current, and splitting a group into sub-groups.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::AiError;
use crate::gateway::schema::{
    AssignOutput, DimensionsOutput, LensesOutput, NamedDescription, SimilarityOutput,
};
use crate::gateway::{vars, ScopedGateway, TemplateId};
use crate::ids::{GroupId, LensId, NoteId};
use crate::keyed::KeyedNotes;
use crate::workspace::{
    Affinity, AffinityLens, LensCandidate, LensPage, LensScope, MutationKind, Note, WorkspaceState,
};

pub const MIN_SCOPE_NOTES: usize = 2;
pub const MAX_LENSES: usize = 5;
pub const MAX_REFINEMENT_PASSES: usize = 5;
pub const MAX_DIMENSIONS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Refined {
    pub candidate: LensCandidate,
    /// Similarity assessments performed, at most [`MAX_REFINEMENT_PASSES`].
    pub passes: usize,
}

fn groups_json(affinities: &[Affinity]) -> String {
    let list: Vec<_> = affinities
        .iter()
        .map(|a| json!({"name": a.group_name, "description": a.group_description}))
        .collect();
    serde_json::to_string_pretty(&list).expect("json list serializes")
}

fn ensure_enough(notes: &[&Note]) -> Result<(), AiError> {
    if notes.len() < MIN_SCOPE_NOTES {
        return Err(AiError::TooFewNotes {
            needed: MIN_SCOPE_NOTES,
            found: notes.len(),
        });
    }
    Ok(())
}

/// Proposes 2 to 5 lenses for the notes in `scope`, each already refined.
pub async fn generate_lenses(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    scope: &LensScope,
) -> Result<Vec<Refined>, AiError> {
    let notes = state.scope_notes(scope);
    ensure_enough(&notes)?;
    let keyed = KeyedNotes::new(notes.iter().copied());
    let ideas = keyed.describe(state, |n| {
        let topic = n
            .group
            .as_ref()
            .and_then(|g| state.group(g))
            .map(|g| json!(g.title))
            .unwrap_or_else(|| json!("undefined"));
        vec![("pre_topic", topic)]
    });
    let instruction = match scope {
        LensScope::Customized { instruction } => instruction.trim(),
        _ => "",
    };
    let out = gw
        .complete_structured::<LensesOutput>(
            TemplateId::AffinityLenses,
            &vars([("ideas", ideas.as_str()), ("instruction", instruction)]),
        )
        .await?;
    let candidates: Vec<LensCandidate> = out
        .value
        .usable()
        .into_iter()
        .take(MAX_LENSES)
        .map(|l| LensCandidate {
            name: l.name.trim().to_string(),
            description: l.description.trim().to_string(),
            affinities: l
                .distinct_groups()
                .into_iter()
                .map(|g| Affinity::new(g.name, g.description))
                .collect(),
            scope: scope.clone(),
            refinement_incomplete: false,
        })
        .collect();
    let threshold = state.settings.similarity_threshold;
    let mut refined = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        refined.push(refine_group_names(gw, candidate, threshold).await?);
    }
    Ok(refined)
}

/// Asks the provider to score pairwise similarity of the group names and
/// adopts its renamed groups until every pair scores below `threshold`, for
/// at most [`MAX_REFINEMENT_PASSES`] assessments.
pub async fn refine_group_names(
    gw: &ScopedGateway,
    mut candidate: LensCandidate,
    threshold: f64,
) -> Result<Refined, AiError> {
    for pass in 1..=MAX_REFINEMENT_PASSES {
        let out = gw
            .complete_structured::<SimilarityOutput>(
                TemplateId::GroupNameSimilarity,
                &vars([
                    ("lensName", candidate.name.as_str()),
                    ("lensDescription", candidate.description.as_str()),
                    ("groups", groups_json(&candidate.affinities).as_str()),
                ]),
            )
            .await?
            .value;
        if out.similarities.iter().all(|s| s.score < threshold) {
            candidate.refinement_incomplete = false;
            return Ok(Refined {
                candidate,
                passes: pass,
            });
        }
        if let Some(revised) = adoptable(&out.revised_groups) {
            candidate.affinities = revised;
        }
    }
    candidate.refinement_incomplete = true;
    Ok(Refined {
        candidate,
        passes: MAX_REFINEMENT_PASSES,
    })
}

/// Revised groups are used only if they still form a valid lens.
fn adoptable(revised: &[NamedDescription]) -> Option<Vec<Affinity>> {
    let mut seen = BTreeSet::new();
    let affinities: Vec<Affinity> = revised
        .iter()
        .filter(|g| seen.insert(g.name.trim().to_lowercase()))
        .map(|g| Affinity::new(g.name.trim(), g.description.trim()))
        .collect();
    (affinities.len() >= 2).then_some(affinities)
}

/// Exclusive assignment of `notes` to the lens's groups. Notes listed under
/// several groups keep the first; unlisted notes go to UNGROUPED (`None`).
pub async fn apply_lens(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    lens: &LensCandidate,
    notes: &[&Note],
) -> Result<(BTreeMap<NoteId, Option<String>>, BTreeMap<String, String>), AiError> {
    let mut assignment: BTreeMap<NoteId, Option<String>> =
        notes.iter().map(|n| (n.id.clone(), None)).collect();
    let mut rationale = BTreeMap::new();
    if notes.is_empty() {
        return Ok((assignment, rationale));
    }
    let keyed = KeyedNotes::new(notes.iter().copied());
    let out = gw
        .complete_structured::<AssignOutput>(
            TemplateId::AffinityAssign,
            &vars([
                ("lensName", lens.name.as_str()),
                ("lensDescription", lens.description.as_str()),
                ("groups", groups_json(&lens.affinities).as_str()),
                ("ideas", keyed.describe(state, |_| Vec::new()).as_str()),
            ]),
        )
        .await?
        .value;
    let mut placed = BTreeSet::new();
    for group in &out.groups {
        let key = group.name.trim().to_lowercase();
        let Some(affinity) = lens
            .affinities
            .iter()
            .find(|a| a.group_name.trim().to_lowercase() == key)
        else {
            tracing::warn!(group = %group.name, "assignment names a group outside the lens");
            continue;
        };
        for note_key in &group.notes {
            let Some(id) = keyed.resolve(note_key) else {
                tracing::warn!(key = %note_key, "assignment names an unknown idea");
                continue;
            };
            if !placed.insert(id.clone()) {
                tracing::warn!(note = %id, group = %affinity.group_name, "idea assigned twice; keeping the first group");
                continue;
            }
            assignment.insert(id.clone(), Some(affinity.group_name.clone()));
        }
        if !group.rationale.trim().is_empty() {
            rationale
                .entry(affinity.group_name.clone())
                .or_insert_with(|| group.rationale.trim().to_string());
        }
    }
    Ok((assignment, rationale))
}

/// Materializes a lens page over the lens's current scope.
pub async fn install_lens(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    lens_id: LensId,
    candidate: LensCandidate,
) -> Result<MutationKind, AiError> {
    if state.lens_by_name(&candidate.name).is_some() {
        return Err(crate::workspace::WorkspaceError::DuplicateLensName(candidate.name).into());
    }
    let notes = state.scope_notes(&candidate.scope);
    let (assignment, rationale) = apply_lens(gw, state, &candidate, &notes).await?;
    let lens = AffinityLens::from_candidate(lens_id.clone(), candidate);
    Ok(MutationKind::InstallLensPage {
        lens,
        page: LensPage {
            lens: lens_id,
            assignment,
            rationale,
            last_regroup_revision: state.revision,
        },
    })
}

/// What changed on a lens page since its last regroup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegroupPlan {
    /// In scope but unassigned, or edited after the last regroup.
    pub stale: Vec<NoteId>,
    /// Assigned but no longer in scope.
    pub removed: Vec<NoteId>,
}

impl RegroupPlan {
    pub fn is_empty(&self) -> bool {
        self.stale.is_empty() && self.removed.is_empty()
    }
}

pub fn plan_regroup(state: &WorkspaceState, lens: &LensId) -> Result<RegroupPlan, AiError> {
    let l = state.lenses.get(lens).ok_or_else(|| AiError::unknown("lens", lens))?;
    let page = &state.lens_pages[lens];
    let in_scope = state.scope_notes(&l.scope);
    let scope_ids: BTreeSet<&NoteId> = in_scope.iter().map(|n| &n.id).collect();
    let stale = in_scope
        .iter()
        .filter(|n| {
            !page.assignment.contains_key(&n.id) || n.updated_at_revision > page.last_regroup_revision
        })
        .map(|n| n.id.clone())
        .collect();
    let removed = page
        .assignment
        .keys()
        .filter(|id| !scope_ids.contains(id))
        .cloned()
        .collect();
    Ok(RegroupPlan { stale, removed })
}

/// Incremental regroup for a lens page: only new or edited notes are sent
/// to the provider; untouched notes keep their groups. `None` when nothing
/// changed.
pub async fn regroup(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    lens: &LensId,
) -> Result<Option<MutationKind>, AiError> {
    let plan = plan_regroup(state, lens)?;
    if plan.is_empty() {
        return Ok(None);
    }
    let l = &state.lenses[lens];
    let page = &state.lens_pages[lens];
    let mut assignment = page.assignment.clone();
    let mut rationale = page.rationale.clone();
    for id in &plan.removed {
        assignment.remove(id);
    }
    if !plan.stale.is_empty() {
        let candidate = LensCandidate {
            name: l.name.clone(),
            description: l.description.clone(),
            affinities: l.affinities.clone(),
            scope: l.scope.clone(),
            refinement_incomplete: l.refinement_incomplete,
        };
        let notes: Vec<&Note> = plan.stale.iter().filter_map(|id| state.note(id)).collect();
        let (fresh, fresh_rationale) = apply_lens(gw, state, &candidate, &notes).await?;
        assignment.extend(fresh);
        for (group, text) in fresh_rationale {
            rationale.entry(group).or_insert(text);
        }
    }
    Ok(Some(MutationKind::ReplaceGrouping {
        lens: lens.clone(),
        assignment,
        rationale,
        regrouped_at_revision: state.revision,
    }))
}

/// Notes in `group` and in all of its sub-groups.
fn group_pool<'a>(state: &'a WorkspaceState, group: &GroupId) -> Vec<&'a Note> {
    let mut groups = vec![group.clone()];
    groups.extend(state.descendants(group));
    let mut pool: Vec<&Note> = groups
        .iter()
        .filter_map(|g| state.group(g))
        .flat_map(|g| g.member_notes.iter())
        .filter_map(|id| state.note(id))
        .collect();
    pool.sort_by(|a, b| {
        a.created_at_revision
            .cmp(&b.created_at_revision)
            .then_with(|| a.id.cmp(&b.id))
    });
    pool
}

pub async fn suggest_dimensions(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    group: &GroupId,
) -> Result<Vec<String>, AiError> {
    let g = state.group(group).ok_or_else(|| AiError::unknown("group", group))?;
    let pool = group_pool(state, group);
    ensure_enough(&pool)?;
    let keyed = KeyedNotes::new(pool.iter().copied());
    let out = gw
        .complete_structured::<DimensionsOutput>(
            TemplateId::SuggestDimensions,
            &vars([
                ("groupTitle", g.title.as_str()),
                ("ideas", keyed.describe(state, |_| Vec::new()).as_str()),
            ]),
        )
        .await?;
    let mut dims = out.value.distinct();
    dims.truncate(MAX_DIMENSIONS);
    Ok(dims)
}

/// Splits a group into one sub-group per dimension that receives notes.
/// Existing sub-groups are dissolved first, so reruns replace rather than
/// nest. Notes the provider cannot place stay directly in the group.
pub async fn hierarchical_group(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    group: &GroupId,
    dimensions: &[String],
) -> Result<Vec<MutationKind>, AiError> {
    let g = state.group(group).ok_or_else(|| AiError::unknown("group", group))?;
    let mut seen = BTreeSet::new();
    let dims: Vec<String> = dimensions
        .iter()
        .map(|d| d.trim().to_string())
        .filter(|d| !d.is_empty() && seen.insert(d.to_lowercase()))
        .collect();
    if dims.is_empty() {
        return Err(AiError::EmptyDimensions);
    }
    let pool = group_pool(state, group);
    let candidate = LensCandidate {
        name: format!("Sub-groups of {}", g.title),
        description: format!("Organize the ideas of \"{}\" by: {}", g.title, dims.join(", ")),
        affinities: dims.iter().map(|d| Affinity::new(d.clone(), "")).collect(),
        scope: LensScope::Global,
        refinement_incomplete: false,
    };
    let (assignment, rationale) = apply_lens(gw, state, &candidate, &pool).await?;

    let mut ops = Vec::new();
    for note in &pool {
        if note.group.as_ref() != Some(group) {
            ops.push(MutationKind::AssignNoteToGroup {
                note: note.id.clone(),
                group: group.clone(),
            });
        }
    }
    // Deepest first so no deletion reparents a group that is deleted later.
    let mut old = state.descendants(group);
    old.sort_by_key(|d| std::cmp::Reverse(depth(state, d)));
    ops.extend(old.into_iter().map(|d| MutationKind::DeleteGroup { group: d }));
    for (i, dim) in dims.iter().enumerate() {
        let members: Vec<NoteId> = pool
            .iter()
            .filter(|n| assignment.get(&n.id).and_then(|a| a.as_deref()) == Some(dim.as_str()))
            .map(|n| n.id.clone())
            .collect();
        if members.is_empty() {
            continue;
        }
        ops.push(MutationKind::CreateGroup {
            id: None,
            title: dim.clone(),
            page: g.page.clone(),
            parent: Some(group.clone()),
            position: g.position.offset(i as f64 * 4.0, 4.0),
            rationale: rationale.get(dim).cloned(),
            members,
        });
    }
    Ok(ops)
}

fn depth(state: &WorkspaceState, group: &GroupId) -> usize {
    let mut d = 0;
    let mut cur = state.group(group).and_then(|g| g.parent.clone());
    while let Some(p) = cur {
        d += 1;
        cur = state.group(&p).and_then(|g| g.parent.clone());
    }
    d
}
