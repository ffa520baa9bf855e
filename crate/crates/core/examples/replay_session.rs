//! Replays a recorded session script through the full server stack with the
//! scripted provider and checks the final board against its golden file.
//!
//!     cargo run --example replay_session -- examples/trip-planning.session fixtures/trip-planning

use std::path::{Path, PathBuf};
use std::sync::Arc;

use board_engine::gateway::{Gateway, MockProvider};
use board_engine::server::{run_script, ReplayScript};
use board_engine::snapshot::MemorySnapshotStore;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let here = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let script_path = args.next().unwrap_or_else(|| here.join("examples/trip-planning.session"));
    let fixtures = args.next().unwrap_or_else(|| here.join("fixtures/trip-planning"));

    let (script, dir) = ReplayScript::load(&script_path)?;
    let gateway = Gateway::mock(MockProvider::from_dir(fixtures)?);
    let report = run_script(&script, &dir, gateway.clone(), Arc::new(MemorySnapshotStore::new())).await?;

    for (client, msgs) in &report.received {
        println!("{client} received {} messages", msgs.len());
    }
    for (template, calls) in gateway.completion_calls_by_template() {
        println!("  {template:?}: {calls}");
    }
    println!("final revision {}", report.revision);
    for f in &report.failures {
        println!("FAIL {f}");
    }
    match report.golden_match {
        Some(true) => println!("final state matches the golden file"),
        Some(false) => println!("final state DIFFERS from the golden file"),
        None => println!("no golden file"),
    }
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
