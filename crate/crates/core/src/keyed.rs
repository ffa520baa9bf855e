//! Short keys for notes inside prompts.
//!
//! Prompts refer to notes as "1", "2", ... in a stable order instead of by
//! identifier. Identifiers are random tokens, so keying prompts on them
//! would make scripted fixtures impossible to write and waste tokens.

use std::collections::HashMap;

use serde_json::{json, Value};

use crate::ids::NoteId;
use crate::workspace::{Note, WorkspaceState};

#[derive(Debug, Clone, Default)]
pub struct KeyedNotes {
    ids: Vec<NoteId>,
    by_key: HashMap<String, usize>,
    by_id: HashMap<NoteId, usize>,
}

impl KeyedNotes {
    /// Keys follow the given order, starting at "1".
    pub fn new<'a>(notes: impl IntoIterator<Item = &'a Note>) -> Self {
        let ids: Vec<NoteId> = notes.into_iter().map(|n| n.id.clone()).collect();
        let by_key = (0..ids.len()).map(|i| ((i + 1).to_string(), i)).collect();
        let by_id = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Self { ids, by_key, by_id }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[NoteId] {
        &self.ids
    }

    pub fn key_of(&self, id: &NoteId) -> Option<String> {
        self.by_id.get(id).map(|i| (i + 1).to_string())
    }

    /// Accepts "3", " 3 ", "#3" or a raw note identifier.
    pub fn resolve(&self, key: &str) -> Option<&NoteId> {
        let key = key.trim();
        let key = key.strip_prefix('#').unwrap_or(key).trim();
        self.by_key
            .get(key)
            .or_else(|| self.by_id.get(&NoteId::new(key)))
            .map(|&i| &self.ids[i])
    }

    /// `[{"key": "1", "text": ..., <extra fields>}, ...]` as pretty JSON.
    pub fn describe(
        &self,
        state: &WorkspaceState,
        extra: impl Fn(&Note) -> Vec<(&'static str, Value)>,
    ) -> String {
        let list: Vec<Value> = self
            .ids
            .iter()
            .enumerate()
            .filter_map(|(i, id)| {
                let note = state.note(id)?;
                let mut item = json!({"key": (i + 1).to_string(), "text": note.text});
                for (k, v) in extra(note) {
                    item[k] = v;
                }
                Some(item)
            })
            .collect();
        serde_json::to_string_pretty(&list).expect("json list serializes")
    }

    pub fn describe_with_authors(&self, state: &WorkspaceState) -> String {
        self.describe(state, |n| vec![("author", json!(n.author.as_str()))])
    }
}
