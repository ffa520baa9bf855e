mod common;

use std::sync::Arc;

use board_engine::clock::SimClock;
use board_engine::gateway::{Gateway, MockProvider};
use board_engine::ids::WorkspaceId;
use board_engine::server::{Hub, HubOptions, ServerError, Ticking};
use board_engine::snapshot::{FileSnapshotStore, SnapshotError, SnapshotStore};
use board_engine::sync::{AiOutcome, AiRequest, ClientMessage, ServerMessage};
use board_engine::workspace::{content_json, MutationKind};
use common::*;

#[test]
fn file_store_listing() {
    let dir = tempfile::tempdir().unwrap();
    let store = FileSnapshotStore::new(dir.path());
    let ws = WorkspaceId::new("w");
    assert!(store.list(&ws).unwrap().is_empty());

    let mut state = empty_state();
    add_note(&mut state, "n1", "u1", "Book an Airbnb");
    store.save(&state, "before-grouping", false, 10).unwrap();
    assert_eq!(store.list(&ws).unwrap()[0].name.as_str(), "before-grouping");
    assert!(matches!(
        store.save(&state, "before-grouping", false, 11),
        Err(SnapshotError::NameExists(_))
    ));

    for i in 2..=4 {
        add_note(&mut state, &format!("n{i}"), "u1", "more");
    }
    store.save(&state, "v2", false, 20).unwrap();
    let listed = store.list(&ws).unwrap();
    let names: Vec<_> = listed.iter().map(|m| m.name.as_str()).collect();
    assert_eq!(names, ["v2", "before-grouping"]);
    assert_eq!((listed[0].revision, listed[1].revision), (4, 1));

    // A second store over the same directory sees the same snapshots.
    let reopened = FileSnapshotStore::new(dir.path());
    assert_eq!(reopened.list(&ws).unwrap(), listed);
    assert!(matches!(reopened.load(&ws, "nope"), Err(SnapshotError::UnknownSnapshot(_))));
}

fn file_harness(dir: &std::path::Path) -> (Hub, SimClock) {
    let clock = SimClock::new(5_000);
    let hub = Hub::new(
        Gateway::mock(MockProvider::new().with_audio("a", "hello")),
        Arc::new(FileSnapshotStore::new(dir)),
        Arc::new(clock.clone()),
        HubOptions { ticking: Ticking::Manual, expire_idle: false, seed: Some(9), ..HubOptions::default() },
    );
    (hub, clock)
}

#[tokio::test]
async fn rollback_restores_content_and_keeps_revision_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let (hub, _clock) = file_harness(dir.path());
    let handle = hub.create(&WorkspaceId::new("w")).0;
    let (session, mut rx) = handle.join("alice".into()).await.unwrap();
    for (seq, text) in [(1, "Book an Airbnb"), (2, "Rent a car")] {
        handle
            .send(&session, ClientMessage::SubmitMutation { client_seq: seq, mutation: create_note(None, text, None) })
            .unwrap();
    }
    let saved_state = handle.state().await.unwrap();
    let meta = handle.save_snapshot("before cleanup", false).await.unwrap();
    assert_eq!(meta.revision, 2);

    let victim = saved_state.notes.keys().next().unwrap().clone();
    handle
        .send(&session, ClientMessage::SubmitMutation { client_seq: 3, mutation: MutationKind::DeleteNote { note: victim } })
        .unwrap();
    let revision = handle.load_snapshot("before cleanup").await.unwrap();
    assert_eq!(revision, 4);
    let restored = handle.state().await.unwrap();
    assert_eq!(content_json(&restored), content_json(&saved_state));
    assert_eq!(restored.revision, 4);

    let mut snapshots = 0;
    while let Ok(m) = rx.try_recv() {
        if let ServerMessage::JoinSnapshot { revision, .. } = m {
            snapshots += 1;
            assert!(snapshots == 1 || revision == 4);
        }
    }
    assert_eq!(snapshots, 2, "initial join plus the rollback");

    assert!(matches!(
        handle.load_snapshot("missing").await,
        Err(ServerError::Snapshot(SnapshotError::UnknownSnapshot(_)))
    ));
    assert_eq!(handle.state().await.unwrap().revision, 4);
    hub.shutdown().await;
}

#[tokio::test]
async fn loading_during_a_recording_stops_it_first() {
    let h = Harness::new(Gateway::mock(MockProvider::new().with_audio("a", "hello there")));
    let mut alice = h.join("alice").await;
    let mut bob = h.join("bob").await;
    h.submit(&mut alice, create_note(None, "Book an Airbnb", None));
    h.ai(&mut alice, AiRequest::SaveSnapshot { name: "quiet".into(), overwrite: false });
    h.send(&bob, ClientMessage::StartRecording);
    h.settle(&mut [&mut alice, &mut bob]).await;
    assert!(h.state().await.active_recording.is_some());

    h.ai(&mut alice, AiRequest::LoadSnapshot { name: "quiet".into() });
    h.settle(&mut [&mut alice, &mut bob]).await;
    assert!(h.state().await.active_recording.is_none());
    let stopped = bob.count(|m| matches!(m, ServerMessage::RecordingStopped { .. }));
    assert_eq!(stopped, 1);
    let order: Vec<&str> = bob
        .seen
        .iter()
        .filter_map(|m| match m {
            ServerMessage::RecordingStopped { .. } => Some("stopped"),
            ServerMessage::JoinSnapshot { .. } => Some("snapshot"),
            _ => None,
        })
        .collect();
    assert_eq!(order, ["snapshot", "stopped", "snapshot"]);
    let listed = h.store.list(&WorkspaceId::new("w")).unwrap();
    assert_eq!(listed.len(), 1);

    // A new recording can start right away.
    h.send(&bob, ClientMessage::StartRecording);
    h.settle(&mut [&mut bob]).await;
    assert!(bob.errors().is_empty());
    let applied = alice.count(|m| matches!(m, ServerMessage::AiResult { result: AiOutcome::Applied { .. }, .. }));
    assert_eq!(applied, 1);
}
