//! Saves named snapshots to disk, lists them and restores one.
//!
//!     cargo run --example snapshots -- ./snapshot-demo

use std::path::PathBuf;

use board_engine::ids::{NoteId, UserId, WorkspaceId};
use board_engine::snapshot::{FileSnapshotStore, SnapshotStore};
use board_engine::workspace::{to_canonical_json, Mutation, MutationKind, WorkspaceState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(format!("board-snapshots-{}", std::process::id())));
    let store = FileSnapshotStore::new(&root);
    let id = WorkspaceId::new("snapshot-demo");
    let mut state = WorkspaceState::new(id.clone());
    let user = UserId::new("alice");

    for (i, text) in ["Book an Airbnb", "Rent a car", "Pack sunscreen"].iter().enumerate() {
        state.apply(&Mutation::new(
            user.clone(),
            MutationKind::CreateNote {
                id: Some(NoteId::new(format!("n{i}"))),
                text: text.to_string(),
                position: Default::default(),
                page: Default::default(),
                provenance: Default::default(),
                group: None,
            },
        ))?;
    }
    let saved = store.save(&state, "before cleanup", false, 1_700_000_000_000)?;
    println!("saved {:?} at revision {}", saved.name.as_str(), saved.revision);

    state.apply(&Mutation::new(user, MutationKind::DeleteNote { note: NoteId::new("n1") }))?;
    store.save(&state, "after cleanup", false, 1_700_000_060_000)?;
    if let Err(e) = store.save(&state, "after cleanup", false, 1_700_000_120_000) {
        println!("saving twice without overwrite: {e}");
    }

    for meta in store.list(&id)? {
        println!("  {:<16} revision {}", meta.name.as_str(), meta.revision);
    }
    let restored = store.load(&id, "before cleanup")?;
    println!("restored {} notes, round-trip exact: {}", restored.notes.len(), {
        let again = store.load(&id, "before cleanup")?;
        to_canonical_json(&again) == to_canonical_json(&restored)
    });
    println!("files under {}", root.display());
    Ok(())
}
