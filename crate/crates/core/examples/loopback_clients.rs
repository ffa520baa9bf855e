//! Two in-process clients share a workspace through the hub. Each keeps an
//! optimistic replica that converges on the server's order.

use std::sync::Arc;

use board_engine::clock::SystemClock;
use board_engine::gateway::{Gateway, MockProvider};
use board_engine::server::{Hub, HubOptions};
use board_engine::snapshot::MemorySnapshotStore;
use board_engine::sync::transport::loopback;
use board_engine::sync::{ClientMessage, ClientReplica, ServerMessage};
use board_engine::ids::{UserId, WorkspaceId};
use board_engine::workspace::{to_canonical_json, MutationKind};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hub = Hub::new(
        Gateway::mock(MockProvider::new()),
        Arc::new(MemorySnapshotStore::new()),
        Arc::new(SystemClock),
        HubOptions::default(),
    );
    let workspace = WorkspaceId::new("loopback-demo");
    let mut clients = Vec::new();
    for name in ["alice", "bob"] {
        let (mut conn, server_end) = loopback();
        let h = hub.clone();
        tokio::spawn(async move { h.serve_framed(server_end).await });
        conn.send(&ClientMessage::Join { workspace: workspace.clone(), user: UserId::new(name) }).await?;
        let mut replica = ClientReplica::new(UserId::new(name));
        if let Some(Ok(msg)) = conn.recv().await {
            replica.handle(&msg)?;
        }
        clients.push((conn, replica));
    }

    for (i, (conn, replica)) in clients.iter_mut().enumerate() {
        for j in 0..3 {
            let msg = replica.submit(MutationKind::CreateNote {
                id: None,
                text: format!("idea {j} from client {i}"),
                position: Default::default(),
                page: Default::default(),
                provenance: Default::default(),
                group: None,
            });
            conn.send(&msg).await?;
        }
    }

    // A pong arrives after everything queued before the ping.
    for (conn, replica) in clients.iter_mut() {
        conn.send(&ClientMessage::Ping { nonce: 1 }).await?;
        while let Some(Ok(msg)) = conn.recv().await {
            if matches!(msg, ServerMessage::Pong { .. }) {
                break;
            }
            replica.handle(&msg)?;
        }
    }
    // Drain whatever the other client's edits produced after our pong.
    let server = to_canonical_json(&hub.get(&workspace).expect("workspace").state().await?);
    for (name, (conn, replica)) in ["alice", "bob"].into_iter().zip(clients.iter_mut()) {
        while replica.state().map(to_canonical_json).as_deref() != Some(server.as_str()) {
            match conn.recv().await {
                Some(Ok(msg)) => replica.handle(&msg)?,
                _ => break,
            }
        }
        let state = replica.state().expect("joined");
        println!(
            "{name}: revision {}, {} notes, pending {}, matches server: {}",
            state.revision,
            state.notes.len(),
            replica.pending(),
            to_canonical_json(state) == server
        );
    }
    hub.shutdown().await;
    Ok(())
}
