#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use board_engine::clock::SimClock;
use board_engine::gateway::{Gateway, MockProvider, ScopedGateway};
use board_engine::ids::{GroupId, NoteId, SessionId, UserId, WorkspaceId};
use board_engine::server::{Hub, HubOptions, Ticking, WorkspaceHandle};
use board_engine::snapshot::{MemorySnapshotStore, SnapshotStore};
use board_engine::sync::{AiRequest, ClientMessage, ServerMessage};
use board_engine::workspace::{Mutation, MutationKind, Position, WorkspaceState};
use serde_json::Value;
use tokio::sync::mpsc::UnboundedReceiver;

pub fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

pub fn trip_fixtures() -> PathBuf {
    crate_dir().join("fixtures/trip-planning")
}

pub fn mock(fixtures: Value) -> Gateway {
    Gateway::mock(MockProvider::from_json_str(&fixtures.to_string()).expect("fixture parses"))
}

pub fn trip_gateway() -> Gateway {
    Gateway::mock(MockProvider::from_dir(trip_fixtures()).expect("trip fixtures load"))
}

pub fn scoped(gw: &Gateway) -> ScopedGateway {
    gw.for_workspace(&WorkspaceId::new("w"))
}

pub fn empty_state() -> WorkspaceState {
    WorkspaceState::new(WorkspaceId::new("w"))
}

pub fn apply(state: &mut WorkspaceState, author: &str, op: MutationKind) {
    state.apply(&Mutation::new(UserId::new(author), op)).expect("mutation applies");
}

pub fn add_note(state: &mut WorkspaceState, id: &str, author: &str, text: &str) -> NoteId {
    apply(state, author, create_note(Some(id), text, None));
    NoteId::new(id)
}

pub fn add_group(state: &mut WorkspaceState, id: &str, title: &str, members: &[&str]) -> GroupId {
    apply(
        state,
        "u1",
        MutationKind::CreateGroup {
            id: Some(GroupId::new(id)),
            title: title.into(),
            page: Default::default(),
            parent: None,
            position: Position::ORIGIN,
            rationale: None,
            members: members.iter().map(|m| NoteId::new(*m)).collect(),
        },
    );
    GroupId::new(id)
}

pub fn create_note(id: Option<&str>, text: &str, group: Option<&GroupId>) -> MutationKind {
    MutationKind::CreateNote {
        id: id.map(NoteId::new),
        text: text.into(),
        position: Position::ORIGIN,
        page: Default::default(),
        provenance: Default::default(),
        group: group.cloned(),
    }
}

/// A workspace actor on a simulated clock, driven step by step.
pub struct Harness {
    pub hub: Hub,
    pub clock: SimClock,
    pub handle: WorkspaceHandle,
    pub gateway: Gateway,
    pub store: Arc<dyn SnapshotStore>,
}

pub struct Client {
    pub session: SessionId,
    pub rx: UnboundedReceiver<ServerMessage>,
    pub seen: Vec<ServerMessage>,
    next_seq: u64,
    next_request: u64,
}

impl Harness {
    pub fn new(gateway: Gateway) -> Self {
        Self::with_options(gateway, false)
    }

    pub fn with_options(gateway: Gateway, expire_idle: bool) -> Self {
        let clock = SimClock::new(1_000_000);
        let store: Arc<dyn SnapshotStore> = Arc::new(MemorySnapshotStore::new());
        let hub = Hub::new(
            gateway.clone(),
            store.clone(),
            Arc::new(clock.clone()),
            HubOptions {
                auto_create: true,
                ticking: Ticking::Manual,
                expire_idle,
                seed: Some(3),
                hint_interval_ms: 10_000,
            },
        );
        let handle = hub.create(&WorkspaceId::new("w")).0;
        Self { hub, clock, handle, gateway, store }
    }

    pub async fn join(&self, user: &str) -> Client {
        let (session, rx) = self.handle.join(UserId::new(user)).await.expect("join");
        let mut c = Client { session, rx, seen: Vec::new(), next_seq: 1, next_request: 0 };
        c.drain();
        c
    }

    /// Waits until the actor is idle, then collects everything delivered.
    pub async fn settle(&self, clients: &mut [&mut Client]) {
        self.handle.wait_idle().await.expect("actor alive");
        self.handle.info().await.expect("actor alive");
        for c in clients.iter_mut() {
            c.drain();
        }
    }

    pub async fn tick(&self, ms: u64) {
        self.clock.advance(ms);
        self.handle.tick().await.expect("actor alive");
        self.handle.wait_idle().await.expect("actor alive");
    }

    pub async fn state(&self) -> WorkspaceState {
        self.handle.state().await.expect("actor alive")
    }

    pub fn submit(&self, c: &mut Client, op: MutationKind) -> u64 {
        let seq = c.next_seq;
        c.next_seq += 1;
        self.send(c, ClientMessage::SubmitMutation { client_seq: seq, mutation: op });
        seq
    }

    pub fn ai(&self, c: &mut Client, request: AiRequest) -> String {
        c.next_request += 1;
        let id = format!("r{}", c.next_request);
        self.send(c, ClientMessage::AiRequest { request_id: id.clone(), request });
        id
    }

    pub fn send(&self, c: &Client, msg: ClientMessage) {
        self.handle.send(&c.session, msg).expect("actor alive");
    }
}

impl Client {
    /// Moves every delivered message into `seen`; returns the new ones.
    pub fn drain(&mut self) -> Vec<ServerMessage> {
        let mut fresh = Vec::new();
        while let Ok(m) = self.rx.try_recv() {
            fresh.push(m);
        }
        self.seen.extend(fresh.iter().cloned());
        fresh
    }

    pub fn errors(&self) -> Vec<String> {
        self.seen
            .iter()
            .filter_map(|m| match m {
                ServerMessage::Error { code, .. } => Some(code.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn count(&self, pred: impl Fn(&ServerMessage) -> bool) -> usize {
        self.seen.iter().filter(|m| pred(m)).count()
    }
}
