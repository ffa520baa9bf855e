//! Goal decomposition, relation expansion and query expansion against the
//! scripted trip-planning provider.

use std::path::Path;

use board_engine::gateway::{Gateway, MockProvider};
use board_engine::ideation;
use board_engine::ids::{NoteId, UserId, WorkspaceId};
use board_engine::workspace::{Mutation, MutationKind, WorkspaceState};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/trip-planning");
    let gateway = Gateway::mock(MockProvider::from_dir(fixtures)?);
    let id = WorkspaceId::new("ideation-demo");
    let gw = gateway.for_workspace(&id);
    let mut state = WorkspaceState::new(id);

    let mut subtasks = ideation::decompose_goal(&gw, "Plan a five-day trip to Miami").await?;
    println!("subtasks:");
    for card in &subtasks {
        println!("  {} ({})", card.title, card.brief_detail);
    }

    // Expanding a card turns it into a group on the board.
    let op = ideation::expand_subtask(&state, &mut subtasks[0])?;
    state.apply(&Mutation::new(UserId::new("alice"), with_group_id(op)))?;

    let airbnb = NoteId::new("n_airbnb");
    state.apply(&Mutation::new(
        UserId::new("alice"),
        MutationKind::CreateNote {
            id: Some(airbnb.clone()),
            text: "Book an Airbnb near South Beach".into(),
            position: Default::default(),
            page: Default::default(),
            provenance: Default::default(),
            group: None,
        },
    ))?;

    println!("\nDesires:");
    for hint in ideation::expand_by_relation(&gw, &state, &airbnb, "Desires").await? {
        println!("  {:.2} {}", hint.score, hint.text);
    }
    println!("\nWhat are some potential drawbacks?");
    for hint in ideation::expand_by_query(&gw, &state, &airbnb, "What are some potential drawbacks?").await? {
        println!("  {:.2} {}", hint.score, hint.text);
    }
    println!("\nprovider calls: {}", gateway.completion_calls());
    Ok(())
}

fn with_group_id(op: MutationKind) -> MutationKind {
    match op {
        MutationKind::CreateGroup { title, page, parent, position, rationale, members, .. } => MutationKind::CreateGroup {
            id: Some("g_accommodation".into()),
            title,
            page,
            parent,
            position,
            rationale,
            members,
        },
        other => other,
    }
}
