//! Generates lens candidates, installs one as a lens page, edits a note and
//! regroups incrementally.

use std::path::Path;

use board_engine::affinity;
use board_engine::gateway::{Gateway, MockProvider};
use board_engine::ids::{LensId, NoteId, UserId, WorkspaceId};
use board_engine::workspace::{LensScope, Mutation, MutationKind, WorkspaceState};

const NOTES: &[(&str, &str, &str)] = &[
    ("n1", "alice", "Book an Airbnb near South Beach"),
    ("n2", "bob", "Rent a car for the week"),
    ("n3", "bob", "Set a daily food budget of $40 per person"),
    ("n4", "alice", "Take the metro from the airport"),
    ("n5", "alice", "Compare listings for any extra service fee"),
];

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/trip-planning");
    let gateway = Gateway::mock(MockProvider::from_dir(fixtures)?);
    let id = WorkspaceId::new("affinity-demo");
    let gw = gateway.for_workspace(&id);
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

    let candidates = affinity::generate_lenses(&gw, &state, &LensScope::Global).await?;
    for r in &candidates {
        let groups: Vec<_> = r.candidate.affinities.iter().map(|a| a.group_name.as_str()).collect();
        println!("{} [{}] after {} pass(es)", r.candidate.name, groups.join(", "), r.passes);
    }

    let lens = LensId::new("l_planning");
    let op = affinity::install_lens(&gw, &state, lens.clone(), candidates[0].candidate.clone()).await?;
    state.apply(&Mutation::new(UserId::new("alice"), op))?;
    print_page(&state, &lens);

    state.apply(&Mutation::new(
        UserId::new("bob"),
        MutationKind::EditNoteText {
            note: NoteId::new("n2"),
            text: "Skip the car and split rideshare costs".into(),
        },
    ))?;
    let plan = affinity::plan_regroup(&state, &lens)?;
    println!("\nstale after edit: {:?}", plan.stale.iter().map(|n| n.as_str()).collect::<Vec<_>>());
    if let Some(op) = affinity::regroup(&gw, &state, &lens).await? {
        state.apply(&Mutation::new(UserId::new("bob"), op))?;
    }
    print_page(&state, &lens);
    Ok(())
}

fn print_page(state: &WorkspaceState, lens: &LensId) {
    println!();
    for (note, group) in &state.lens_pages[lens].assignment {
        let text = state.note(note).map(|n| n.text.as_str()).unwrap_or("?");
        println!("  {:<24} {text}", group.as_deref().unwrap_or("UNGROUPED"));
    }
}
