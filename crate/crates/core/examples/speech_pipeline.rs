//! Records a short discussion, transcribes it chunk by chunk, then mines it
//! for key information and for notes the talk relates to.

use std::path::Path;

use board_engine::gateway::{Gateway, MockProvider};
use board_engine::ids::{NoteId, RecordingId, UserId, WorkspaceId};
use board_engine::speech::{self, Recorder};
use board_engine::workspace::{Mutation, MutationKind, WorkspaceState};

const NOTES: &[&str] = &[
    "Book an Airbnb near South Beach",
    "Skip the car and split rideshare costs",
    "Set a daily food budget of $40 per person",
    "Take the metro from the airport",
];

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/trip-planning");
    let gateway = Gateway::mock(MockProvider::from_dir(fixtures)?);
    let id = WorkspaceId::new("speech-demo");
    let gw = gateway.for_workspace(&id);
    let mut state = WorkspaceState::new(id);
    for (i, text) in NOTES.iter().enumerate() {
        state.apply(&Mutation::new(
            UserId::new("alice"),
            MutationKind::CreateNote {
                id: Some(NoteId::new(format!("n{}", i + 1))),
                text: text.to_string(),
                position: Default::default(),
                page: Default::default(),
                provenance: Default::default(),
                group: None,
            },
        ))?;
    }

    let mut recorder = Recorder::new();
    recorder.begin(RecordingId::new("r1"), 0)?;
    for (i, tag) in ["airbnb-budget", "rideshare", "weather"].iter().enumerate() {
        let chunk = MockProvider::audio_chunk(tag);
        for seg in speech::transcribe_chunk(&gw, &mut recorder, &chunk, (i as u64 + 1) * 5000).await? {
            println!("[{}] {}-{} ms: {}", seg.index, seg.start_ms, seg.end_ms, seg.text);
        }
    }
    // Every chunk has been transcribed, so the transcript is complete.
    let transcript = recorder.stop()?.ok_or("chunks still outstanding")?;

    println!("\nkey information (relevance >= {}):", state.settings.relevance_threshold);
    let cards = speech::extract_key_info(&gw, &state, &transcript).await?;
    for card in &cards {
        println!("  {:.2} {} (segments {:?})", card.relevance, card.summary, card.source_span);
    }
    println!("\nrelevant notes (relevance > {}):", state.settings.relevance_threshold);
    for card in speech::retrieve_relevant_ideas(&gw, &state, &transcript).await? {
        let text = state.note(&card.note).map(|n| n.text.as_str()).unwrap_or("?");
        println!("  {:.2} {text}\n       <- {}", card.relevance, card.matched_sentence);
    }

    if let Some(card) = cards.first() {
        let op = speech::card_to_note(&state, card);
        state.apply(&Mutation::new(UserId::new("alice"), with_id(op, "n_card")))?;
        println!("\nadded note: {}", state.notes[&NoteId::new("n_card")].text);
    }
    Ok(())
}

fn with_id(op: MutationKind, id: &str) -> MutationKind {
    match op {
        MutationKind::CreateNote { text, position, page, provenance, group, .. } => MutationKind::CreateNote {
            id: Some(NoteId::new(id)),
            text,
            position,
            page,
            provenance,
            group,
        },
        other => other,
    }
}
