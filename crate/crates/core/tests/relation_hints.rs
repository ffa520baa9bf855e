mod common;

use board_engine::clock::Clock;
use board_engine::gateway::{Gateway, TemplateId};
use board_engine::sync::{AiRequest, ServerMessage};
use board_engine::workspace::MutationKind;
use common::*;
use serde_json::json;

fn relations_fixture() -> Gateway {
    mock(json!({"completions": [{
        "template": "relation-hints",
        "responses": [{"relations": [
            {"source": "1", "target": "2", "type": "Causes", "explanation": "x", "confidence": 0.9},
            {"source": "2", "target": "1", "type": "Desires", "explanation": "y", "confidence": 0.7},
            {"source": "1", "target": "3", "type": "Part of", "explanation": "z", "confidence": 0.8},
            {"source": "3", "target": "4", "type": "Related to", "explanation": "w", "confidence": 0.95},
            {"source": "2", "target": "4", "type": "Has a", "explanation": "v", "confidence": 0.4}
        ]}]
    }]}))
}

fn hint_calls(gw: &Gateway) -> u64 {
    gw.completion_calls_for(TemplateId::RelationHints)
}

#[tokio::test]
async fn refresh_follows_edits_and_skips_quiet_intervals() {
    let gw = relations_fixture();
    let h = Harness::new(gw.clone());
    let mut alice = h.join("alice").await;
    let mut bob = h.join("bob").await;
    for (i, text) in ["Airbnb", "food budget", "metro", "rental car"].into_iter().enumerate() {
        let c = if i % 2 == 0 { &mut alice } else { &mut bob };
        h.submit(c, create_note(None, text, None));
    }
    h.settle(&mut [&mut alice, &mut bob]).await;

    // Disabled: time passes, edits happen, nothing is generated.
    h.tick(25_000).await;
    h.submit(&mut alice, create_note(None, "beach", None));
    h.tick(10_000).await;
    assert_eq!(hint_calls(&gw), 0);

    let enabled_at = h.clock.now_ms();
    h.ai(&mut bob, AiRequest::ToggleHints { enabled: true, cross_user_only: false });
    h.settle(&mut [&mut alice, &mut bob]).await;
    let state = h.state().await;
    assert_eq!(hint_calls(&gw), 1);
    let pairs: Vec<_> = state.relation_hints.iter().map(|r| (r.relation_type.label(), r.confidence)).collect();
    assert_eq!(pairs, [("Causes", 0.9), ("Part of", 0.8)]);
    let first_gen = state.relation_hints[0].generated_at_revision;

    // Quiet intervals: due ticks with no provider call.
    h.tick(10_000).await;
    h.tick(10_000).await;
    assert_eq!(hint_calls(&gw), 1);

    h.submit(&mut alice, create_note(None, "sunscreen", None));
    h.settle(&mut [&mut alice]).await;
    h.tick(10_000).await;
    assert_eq!(hint_calls(&gw), 2);
    let state = h.state().await;
    assert!(state.relation_hints.iter().all(|r| r.generated_at_revision > first_gen));

    let attempts = h.handle.hint_attempts().await.unwrap();
    let expected: Vec<u64> = (0..4).map(|i| enabled_at + i * 10_000).collect();
    assert_eq!(attempts, expected);
    h.settle(&mut [&mut alice, &mut bob]).await;
    let refreshes = alice.count(|m| matches!(m, ServerMessage::MutationApplied { mutation, .. } if matches!(mutation, MutationKind::ReplaceRelationHints { .. })));
    assert_eq!(refreshes, 2);
}

#[tokio::test]
async fn cross_user_mode_keeps_only_cross_author_pairs() {
    let gw = relations_fixture();
    let h = Harness::new(gw.clone());
    let mut alice = h.join("alice").await;
    let mut bob = h.join("bob").await;
    // Keys follow creation order: 1 alice, 2 alice, 3 bob, 4 bob.
    for text in ["a1", "a2", "b1", "b2"] {
        let c = if text.starts_with('a') { &mut alice } else { &mut bob };
        h.submit(c, create_note(None, text, None));
        h.settle(&mut []).await;
    }
    h.ai(&mut alice, AiRequest::ToggleHints { enabled: true, cross_user_only: true });
    h.settle(&mut [&mut alice, &mut bob]).await;
    let state = h.state().await;
    assert_eq!(state.relation_hints.len(), 1);
    for r in &state.relation_hints {
        assert_ne!(state.notes[&r.source].author, state.notes[&r.target].author);
    }

    // Turning hints off clears them and stops the schedule.
    h.ai(&mut alice, AiRequest::ToggleHints { enabled: false, cross_user_only: true });
    h.settle(&mut [&mut alice]).await;
    h.submit(&mut bob, create_note(None, "b3", None));
    h.tick(30_000).await;
    assert!(h.state().await.relation_hints.is_empty());
    assert_eq!(hint_calls(&gw), 1);
}

#[tokio::test]
async fn too_few_notes_yields_no_refresh() {
    let gw = relations_fixture();
    let h = Harness::new(gw.clone());
    let mut alice = h.join("alice").await;
    h.submit(&mut alice, create_note(None, "only one", None));
    h.ai(&mut alice, AiRequest::ToggleHints { enabled: true, cross_user_only: false });
    h.settle(&mut [&mut alice]).await;
    let revision = h.state().await.revision;
    h.tick(10_000).await;
    assert_eq!(hint_calls(&gw), 0);
    assert_eq!(h.state().await.revision, revision);
    assert!(alice.errors().is_empty());
}
