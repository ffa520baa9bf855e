//! Drives the relation-hint scheduler on a simulated clock: one refresh per
//! interval, none while the board is unchanged.

use std::path::Path;
use std::sync::Arc;

use board_engine::clock::{Clock, SimClock};
use board_engine::gateway::{Gateway, MockProvider};
use board_engine::ids::{NoteId, UserId, WorkspaceId};
use board_engine::relations::{self, HintScheduler, TickDecision};
use board_engine::workspace::{system_actor, Mutation, MutationKind, WorkspaceState};

const NOTES: &[(&str, &str, &str)] = &[
    ("n1", "alice", "Book an Airbnb near South Beach"),
    ("n2", "bob", "Rent a car for the week"),
    ("n3", "bob", "Set a daily food budget"),
    ("n4", "alice", "Take the metro from the airport"),
    ("n5", "alice", "Compare listings for any extra service fee"),
];

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/trip-planning");
    let gateway = Gateway::mock(MockProvider::from_dir(fixtures)?);
    let id = WorkspaceId::new("hints-demo");
    let gw = gateway.for_workspace(&id);
    let clock = Arc::new(SimClock::new(0));
    let mut state = WorkspaceState::new(id);
    for (id, author, text) in NOTES {
        state.apply(&Mutation::new(
            UserId::new(*author),
            MutationKind::CreateNote {
                id: Some(NoteId::new(*id)),
                text: text.to_string(),
                position: Default::default(),
                page: Default::default(),
                provenance: Default::default(),
                group: None,
            },
        ))?;
    }
    state.apply(&Mutation::new(UserId::new("alice"), relations::toggle_hints(&state, true, true)))?;

    let mut scheduler = HintScheduler::new();
    for second in 0..=35 {
        clock.advance_to(second * 1000);
        if second == 22 {
            state.apply(&Mutation::new(
                UserId::new("bob"),
                MutationKind::EditNoteText {
                    note: NoteId::new("n3"),
                    text: "Set a daily food budget of $40 per person".into(),
                },
            ))?;
            println!("t={second:>2}s bob edits a note");
        }
        match scheduler.poll(clock.now_ms(), &state) {
            TickDecision::Generate(_) => {
                let hints = relations::generate_hints(&gw, &state).await?;
                state.apply(&Mutation::new(system_actor(), MutationKind::ReplaceRelationHints { hints }))?;
                scheduler.succeeded(state.revision);
                println!("t={second:>2}s refreshed, {} hint(s):", state.relation_hints.len());
                for h in &state.relation_hints {
                    println!("        {} -[{}]-> {} ({:.2})", h.source, h.relation_type.label(), h.target, h.confidence);
                }
            }
            TickDecision::Unchanged => println!("t={second:>2}s due, board unchanged, no call"),
            _ => {}
        }
    }
    println!("attempts at {:?} ms, provider calls {}", scheduler.attempts(), gateway.completion_calls());
    Ok(())
}
