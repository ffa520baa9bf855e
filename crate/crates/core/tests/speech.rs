mod common;

use base64::Engine;
use board_engine::gateway::{Gateway, MockProvider};
use board_engine::ids::{NoteId, RecordingId};
use board_engine::speech::{self, KeyInfoCard, Segment, Transcript, TranscriptStatus};
use board_engine::sync::{AiRequest, ClientMessage, ServerMessage};
use board_engine::workspace::{MutationKind, Position, Provenance};
use common::*;
use serde_json::json;

fn transcript(lines: &[&str]) -> Transcript {
    Transcript {
        recording: RecordingId::new("r1"),
        segments: lines
            .iter()
            .enumerate()
            .map(|(i, t)| Segment { index: i, text: t.to_string(), start_ms: i as u64 * 1000, end_ms: (i as u64 + 1) * 1000 })
            .collect(),
        status: TranscriptStatus::Stopped,
    }
}

fn chunk(tag: &str) -> ClientMessage {
    ClientMessage::AudioChunk { data: base64::engine::general_purpose::STANDARD.encode(MockProvider::audio_chunk(tag)) }
}

fn audio_gateway() -> Gateway {
    Gateway::mock(
        MockProvider::new()
            .with_audio("a", "so let's revisit the Airbnb budget")
            .with_audio("b", "flights are cheaper on Tuesday")
            .with_audio("c", "and the room cleaning was infrequent last time"),
    )
}

#[tokio::test]
async fn recording_lifecycle_over_the_wire() {
    let h = Harness::new(audio_gateway());
    let mut alice = h.join("alice").await;
    let mut bob = h.join("bob").await;

    h.send(&alice, ClientMessage::StopRecording);
    h.send(&alice, chunk("a"));
    h.settle(&mut [&mut alice, &mut bob]).await;
    assert_eq!(alice.errors(), ["NoActiveRecording", "NoActiveRecording"]);

    h.send(&alice, ClientMessage::StartRecording);
    h.settle(&mut [&mut alice, &mut bob]).await;
    let state = h.state().await;
    assert!(state.active_recording.is_some());
    h.send(&bob, ClientMessage::StartRecording);
    h.settle(&mut [&mut alice, &mut bob]).await;
    assert_eq!(bob.errors(), ["RecordingAlreadyActive"]);

    h.send(&alice, chunk("a"));
    h.settle(&mut [&mut alice, &mut bob]).await;
    let segments = |c: &Client| c.count(|m| matches!(m, ServerMessage::TranscriptSegment { .. }));
    assert_eq!((segments(&alice), segments(&bob)), (1, 1));

    // An empty chunk adds nothing to the transcript.
    h.send(&bob, ClientMessage::AudioChunk { data: String::new() });
    h.send(&bob, chunk("b"));
    h.send(&alice, chunk("c"));
    h.send(&alice, ClientMessage::StopRecording);
    h.send(&alice, chunk("a"));
    h.settle(&mut [&mut alice, &mut bob]).await;
    assert_eq!((segments(&alice), segments(&bob)), (3, 3));
    let stopped: Vec<&Transcript> = bob
        .seen
        .iter()
        .filter_map(|m| match m {
            ServerMessage::RecordingStopped { transcript } => Some(transcript),
            _ => None,
        })
        .collect();
    assert_eq!(stopped.len(), 1);
    let t = stopped[0];
    assert_eq!(t.status, TranscriptStatus::Stopped);
    let texts: Vec<_> = t.segments.iter().map(|s| s.text.as_str()).collect();
    assert_eq!(texts, ["so let's revisit the Airbnb budget", "flights are cheaper on Tuesday", "and the room cleaning was infrequent last time"]);
    assert_eq!(t.segments.iter().map(|s| s.index).collect::<Vec<_>>(), [0, 1, 2]);
    assert_eq!(alice.errors().last().map(String::as_str), Some("NoActiveRecording"));
    assert!(h.state().await.active_recording.is_none());
}

#[tokio::test]
async fn extraction_keeps_candidates_at_or_above_threshold() {
    let gw = mock(json!({"completions": [
        {"template": "key-info-extract", "match": {"transcript": "cleaning"},
         "responses": [{"keyInformation": [
            {"summary": "Cleaning was a problem before", "relatedNote": "2", "relevance": 0.8, "segments": [0, 5]},
            {"summary": "Off topic", "relatedNote": null, "relevance": 0.5, "segments": [1]}
         ]}]}
    ]}));
    let mut state = empty_state();
    add_note(&mut state, "n1", "u1", "Book an Airbnb");
    let cleaning = add_note(&mut state, "n2", "u2", "infrequent room cleaning service");

    let err = speech::extract_key_info(&scoped(&gw), &state, &transcript(&[" "])).await.unwrap_err();
    assert_eq!(err.code(), "EmptyTranscript");

    let t = transcript(&["the room cleaning was infrequent last time", "nice weather"]);
    let cards = speech::extract_key_info(&scoped(&gw), &state, &t).await.unwrap();
    assert_eq!(cards.len(), 1);
    assert_eq!(cards[0].relevance, 0.8);
    assert_eq!(cards[0].related_note.as_ref(), Some(&cleaning));
    assert_eq!(cards[0].source_span, [0], "unknown segment indexes are dropped");
}

#[tokio::test]
async fn retrieval_returns_best_sentence_per_note() {
    let gw = mock(json!({"completions": [
        {"template": "relevant-idea-retrieve", "match": {"transcript": "Airbnb budget"},
         "responses": [{"notes": [
            {"note": "2", "sentence": "flights are cheaper on Tuesday", "relevance": 0.4},
            {"note": "1", "sentence": "so let's revisit the Airbnb budget", "relevance": 0.92},
            {"note": "1", "sentence": "flights are cheaper on Tuesday", "relevance": 0.65}
         ]}]},
        {"template": "relevant-idea-retrieve",
         "responses": [{"notes": [
            {"note": "1", "sentence": "s1", "relevance": 0.9},
            {"note": "2", "sentence": "s2", "relevance": 0.6},
            {"note": "3", "sentence": "s3", "relevance": 0.61}
         ]}]}
    ]}));
    let t = transcript(&["so let's revisit the Airbnb budget", "flights are cheaper on Tuesday"]);
    let none = speech::retrieve_relevant_ideas(&scoped(&gw), &empty_state(), &t).await.unwrap();
    assert!(none.is_empty());
    assert_eq!(gw.completion_calls(), 0);

    let mut state = empty_state();
    let airbnb = add_note(&mut state, "n1", "u1", "Book an Airbnb");
    add_note(&mut state, "n2", "u2", "Flights from Chicago");
    let cards = speech::retrieve_relevant_ideas(&scoped(&gw), &state, &t).await.unwrap();
    assert_eq!(cards.len(), 1);
    assert_eq!(cards[0].note, airbnb);
    assert_eq!(cards[0].matched_sentence, "so let's revisit the Airbnb budget");

    add_note(&mut state, "n3", "u2", "Rent a car");
    let cards = speech::retrieve_relevant_ideas(&scoped(&gw), &state, &transcript(&["other talk"])).await.unwrap();
    let notes: Vec<_> = cards.iter().map(|c| c.note.as_str()).collect();
    assert_eq!(notes, ["n1", "n3"]);
}

#[tokio::test]
async fn cards_become_notes_verbatim() {
    let h = Harness::new(Gateway::mock(MockProvider::new()));
    let mut a = h.join("alice").await;
    h.submit(&mut a, MutationKind::CreateNote {
        id: None,
        text: "Budget".into(),
        position: Position::new(3.0, 4.0),
        page: Default::default(),
        provenance: Default::default(),
        group: None,
    });
    h.settle(&mut [&mut a]).await;
    let related = h.state().await.notes.keys().next().unwrap().clone();
    let card = KeyInfoCard {
        summary: "budget cap $2000/person".into(),
        related_note: Some(related.clone()),
        relevance: 0.9,
        source_span: vec![0],
    };
    h.ai(&mut a, AiRequest::CardToNote { card: card.clone() });
    h.ai(&mut a, AiRequest::CardToNote { card: KeyInfoCard { related_note: Some(NoteId::new("gone")), ..card } });
    h.settle(&mut [&mut a]).await;
    let state = h.state().await;
    let made: Vec<_> = state.notes.values().filter(|n| n.text == "budget cap $2000/person").collect();
    assert_eq!(made.len(), 2);
    assert!(made.iter().all(|n| n.provenance == Provenance::DiscussionExtraction));
    let first = made.iter().min_by_key(|n| n.created_at_revision).unwrap();
    let second = made.iter().max_by_key(|n| n.created_at_revision).unwrap();
    assert_eq!(first.position, Position::new(3.0, 5.0));
    assert_eq!(second.position, Position::ORIGIN);
}
