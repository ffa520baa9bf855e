//! Canonical JSON form of a workspace: `formatVersion: 1`, keys sorted at
//! every level, no insignificant whitespace. Snapshots and the join
//! handshake both use this exact encoding.

use serde_json::{Map, Value};

use super::model::{WorkspaceState, FORMAT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CanonicalError {
    #[error("malformed workspace document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported formatVersion {0}")]
    Version(u64),
    #[error("workspace document violates an invariant: {0}")]
    Invalid(String),
}

/// Recursively sorts object keys.
pub fn canonicalize(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonicalize(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

pub fn to_canonical_value(state: &WorkspaceState) -> Value {
    canonicalize(serde_json::to_value(state).expect("workspace state always serializes"))
}

pub fn to_canonical_json(state: &WorkspaceState) -> String {
    serde_json::to_string(&to_canonical_value(state)).expect("values always serialize")
}

pub fn from_canonical_value(value: Value) -> Result<WorkspaceState, CanonicalError> {
    let version = value
        .get("formatVersion")
        .and_then(Value::as_u64)
        .unwrap_or(0);
    if version != u64::from(FORMAT_VERSION) {
        return Err(CanonicalError::Version(version));
    }
    let state: WorkspaceState = serde_json::from_value(value)?;
    state.check_invariants().map_err(CanonicalError::Invalid)?;
    Ok(state)
}

pub fn from_canonical_json(text: &str) -> Result<WorkspaceState, CanonicalError> {
    from_canonical_value(serde_json::from_str(text)?)
}

/// Canonical JSON of everything except the revision counter and the
/// active recording: the part a snapshot rollback restores.
pub fn content_json(state: &WorkspaceState) -> String {
    let mut value = to_canonical_value(state);
    if let Value::Object(map) = &mut value {
        map.remove("revision");
        map.remove("activeRecording");
    }
    serde_json::to_string(&value).expect("values always serialize")
}
