//! Named workspace snapshots.
//!
//! The file backend keeps one directory per workspace:
//!
//! ```text
//! <root>/<workspace>/index.json
//! <root>/<workspace>/<sanitized-name>.snapshot.json
//! ```
//!
//! Snapshot files hold the canonical state document. The index maps names
//! to files and is rewritten atomically (temp file + rename) on every save.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ids::{SnapshotName, WorkspaceId};
use crate::workspace::{from_canonical_value, to_canonical_json, Revision, WorkspaceState};

pub const SNAPSHOT_SUFFIX: &str = ".snapshot.json";
const INDEX_FILE: &str = "index.json";
const MAX_FILE_STEM: usize = 96;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot name {0:?} is empty or unusable")]
    BadName(String),
    #[error("snapshot {0:?} already exists")]
    NameExists(String),
    #[error("no snapshot named {0:?}")]
    UnknownSnapshot(String),
    #[error("snapshot {name:?} is corrupt: {detail}")]
    CorruptSnapshot { name: String, detail: String },
    #[error("snapshot storage failed: {0}")]
    StorageFailure(String),
}

impl SnapshotError {
    pub fn code(&self) -> &'static str {
        match self {
            SnapshotError::BadName(_) => "BadName",
            SnapshotError::NameExists(_) => "NameExists",
            SnapshotError::UnknownSnapshot(_) => "UnknownSnapshot",
            SnapshotError::CorruptSnapshot { .. } => "CorruptSnapshot",
            SnapshotError::StorageFailure(_) => "StorageFailure",
        }
    }
}

fn storage(e: impl std::fmt::Display) -> SnapshotError {
    SnapshotError::StorageFailure(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnapshotMeta {
    pub name: SnapshotName,
    /// Wall-clock milliseconds since the Unix epoch.
    pub saved_at: u64,
    pub revision: Revision,
    #[serde(default)]
    pub corrupt: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct IndexEntry {
    name: SnapshotName,
    file: String,
    saved_at: u64,
    revision: Revision,
    /// Save order, breaks `saved_at` ties.
    seq: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Index {
    next_seq: u64,
    entries: Vec<IndexEntry>,
}

pub trait SnapshotStore: Send + Sync + std::fmt::Debug {
    fn save(
        &self,
        state: &WorkspaceState,
        name: &str,
        overwrite: bool,
        saved_at: u64,
    ) -> Result<SnapshotMeta, SnapshotError>;

    /// Newest first.
    fn list(&self, workspace: &WorkspaceId) -> Result<Vec<SnapshotMeta>, SnapshotError>;

    fn load(&self, workspace: &WorkspaceId, name: &str) -> Result<WorkspaceState, SnapshotError>;
}

/// Keeps `[A-Za-z0-9._-]`, maps everything else to `_`, never starts with a
/// dot. `None` when nothing usable is left.
pub fn sanitize(name: &str) -> Option<String> {
    let cleaned: String = name
        .trim()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .take(MAX_FILE_STEM)
        .collect();
    let cleaned = cleaned.trim_start_matches('.').to_string();
    (!cleaned.is_empty() && cleaned.chars().any(|c| c.is_ascii_alphanumeric())).then_some(cleaned)
}

#[derive(Debug)]
pub struct FileSnapshotStore {
    root: PathBuf,
    // Serializes index read-modify-write within this process.
    lock: Mutex<()>,
}

impl FileSnapshotStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, workspace: &WorkspaceId) -> PathBuf {
        let stem = sanitize(workspace.as_str()).unwrap_or_else(|| "_".to_string());
        self.root.join(stem)
    }

    fn read_index(&self, dir: &Path) -> Result<Index, SnapshotError> {
        match fs::read_to_string(dir.join(INDEX_FILE)) {
            Ok(text) => serde_json::from_str(&text).map_err(storage),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Index::default()),
            Err(e) => Err(storage(e)),
        }
    }

    fn write_index(&self, dir: &Path, index: &Index) -> Result<(), SnapshotError> {
        let text = serde_json::to_string_pretty(index).map_err(storage)?;
        write_atomically(&dir.join(INDEX_FILE), text.as_bytes())
    }

    fn read_entry(&self, dir: &Path, entry: &IndexEntry) -> Result<WorkspaceState, SnapshotError> {
        let corrupt = |detail: String| SnapshotError::CorruptSnapshot {
            name: entry.name.to_string(),
            detail,
        };
        let text = fs::read_to_string(dir.join(&entry.file)).map_err(|e| corrupt(e.to_string()))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        from_canonical_value(value).map_err(|e| corrupt(e.to_string()))
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), SnapshotError> {
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(storage)?;
    file.write_all(bytes).map_err(storage)?;
    file.sync_all().map_err(storage)?;
    fs::rename(&tmp, path).map_err(storage)
}

impl SnapshotStore for FileSnapshotStore {
    fn save(
        &self,
        state: &WorkspaceState,
        name: &str,
        overwrite: bool,
        saved_at: u64,
    ) -> Result<SnapshotMeta, SnapshotError> {
        let name = name.trim();
        let stem = sanitize(name).ok_or_else(|| SnapshotError::BadName(name.to_string()))?;
        let _guard = self.lock.lock().map_err(storage)?;
        let dir = self.dir(&state.id);
        fs::create_dir_all(&dir).map_err(storage)?;
        let mut index = self.read_index(&dir)?;
        let existing = index.entries.iter().position(|e| e.name.as_str() == name);
        if existing.is_some() && !overwrite {
            return Err(SnapshotError::NameExists(name.to_string()));
        }
        let file = match existing {
            Some(i) => index.entries[i].file.clone(),
            None => {
                // Distinct names can sanitize to the same stem.
                let mut file = format!("{stem}{SNAPSHOT_SUFFIX}");
                let mut n = 2;
                while index.entries.iter().any(|e| e.file == file) {
                    file = format!("{stem}-{n}{SNAPSHOT_SUFFIX}");
                    n += 1;
                }
                file
            }
        };
        let payload = to_canonical_json(state);
        write_atomically(&dir.join(&file), payload.as_bytes())?;
        let entry = IndexEntry {
            name: SnapshotName::new(name),
            file,
            saved_at,
            revision: state.revision,
            seq: index.next_seq,
        };
        index.next_seq += 1;
        match existing {
            Some(i) => index.entries[i] = entry,
            None => index.entries.push(entry),
        }
        self.write_index(&dir, &index)?;
        Ok(SnapshotMeta {
            name: SnapshotName::new(name),
            saved_at,
            revision: state.revision,
            corrupt: false,
        })
    }

    fn list(&self, workspace: &WorkspaceId) -> Result<Vec<SnapshotMeta>, SnapshotError> {
        let dir = self.dir(workspace);
        let mut entries = self.read_index(&dir)?.entries;
        entries.sort_by(|a, b| b.saved_at.cmp(&a.saved_at).then(b.seq.cmp(&a.seq)));
        Ok(entries
            .iter()
            .map(|e| SnapshotMeta {
                name: e.name.clone(),
                saved_at: e.saved_at,
                revision: e.revision,
                corrupt: self.read_entry(&dir, e).is_err(),
            })
            .collect())
    }

    fn load(&self, workspace: &WorkspaceId, name: &str) -> Result<WorkspaceState, SnapshotError> {
        let name = name.trim();
        let dir = self.dir(workspace);
        let index = self.read_index(&dir)?;
        let entry = index
            .entries
            .iter()
            .find(|e| e.name.as_str() == name)
            .ok_or_else(|| SnapshotError::UnknownSnapshot(name.to_string()))?;
        self.read_entry(&dir, entry)
    }
}

/// Process-local store with the same naming rules as the file store. Used
/// by the replay runner so scripts never touch the data directory.
#[derive(Debug, Default)]
pub struct MemorySnapshotStore {
    // (workspace, name) -> (meta, canonical payload), plus save order.
    entries: Mutex<Vec<(WorkspaceId, SnapshotMeta, String)>>,
}

impl MemorySnapshotStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SnapshotStore for MemorySnapshotStore {
    fn save(
        &self,
        state: &WorkspaceState,
        name: &str,
        overwrite: bool,
        saved_at: u64,
    ) -> Result<SnapshotMeta, SnapshotError> {
        let name = name.trim();
        sanitize(name).ok_or_else(|| SnapshotError::BadName(name.to_string()))?;
        let mut entries = self.entries.lock().map_err(storage)?;
        let existing = entries
            .iter()
            .position(|(ws, m, _)| *ws == state.id && m.name.as_str() == name);
        if existing.is_some() && !overwrite {
            return Err(SnapshotError::NameExists(name.to_string()));
        }
        if let Some(i) = existing {
            entries.remove(i);
        }
        let meta = SnapshotMeta {
            name: SnapshotName::new(name),
            saved_at,
            revision: state.revision,
            corrupt: false,
        };
        entries.push((state.id.clone(), meta.clone(), to_canonical_json(state)));
        Ok(meta)
    }

    fn list(&self, workspace: &WorkspaceId) -> Result<Vec<SnapshotMeta>, SnapshotError> {
        let entries = self.entries.lock().map_err(storage)?;
        let mut out: Vec<(usize, SnapshotMeta)> = entries
            .iter()
            .enumerate()
            .filter(|(_, (ws, _, _))| ws == workspace)
            .map(|(i, (_, m, _))| (i, m.clone()))
            .collect();
        out.sort_by(|a, b| b.1.saved_at.cmp(&a.1.saved_at).then(b.0.cmp(&a.0)));
        Ok(out.into_iter().map(|(_, m)| m).collect())
    }

    fn load(&self, workspace: &WorkspaceId, name: &str) -> Result<WorkspaceState, SnapshotError> {
        let name = name.trim();
        let entries = self.entries.lock().map_err(storage)?;
        let (_, _, payload) = entries
            .iter()
            .find(|(ws, m, _)| ws == workspace && m.name.as_str() == name)
            .ok_or_else(|| SnapshotError::UnknownSnapshot(name.to_string()))?;
        let value: Value = serde_json::from_str(payload).map_err(storage)?;
        from_canonical_value(value).map_err(storage)
    }
}
