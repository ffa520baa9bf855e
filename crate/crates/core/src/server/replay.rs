//! Scripted sessions: named virtual clients send wire messages to an
//! in-process server running on a simulated clock, one step at a time.
//! After every step the runner waits until the workspace is quiet and every
//! client has drained its inbound stream, so a script always produces the
//! same message sequence and the same final state.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::Engine;
use serde::Deserialize;
use serde_json::Value;

use super::actor::{Ticking, WorkspaceHandle};
use super::hub::{Hub, HubOptions};
use super::ServerError;
use crate::clock::{Clock, SimClock};
use crate::gateway::{Gateway, MockProvider};
use crate::ids::{UserId, WorkspaceId};
use crate::snapshot::SnapshotStore;
use crate::sync::protocol::{encode, ClientMessage, ServerMessage};
use crate::sync::transport::{loopback, FrameReceiver, FrameSender};
use crate::workspace::{to_canonical_json, Event};

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReplayScript {
    pub workspace: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_ms: u64,
    #[serde(default = "default_interval")]
    pub hint_interval_ms: u64,
    /// Expected final state, relative to the script's directory.
    #[serde(default)]
    pub golden: Option<PathBuf>,
    pub steps: Vec<Step>,
}

fn default_start() -> u64 {
    1_700_000_000_000
}

fn default_interval() -> u64 {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum Step {
    /// Connects a client; the name doubles as its user id.
    Join { client: String },
    /// Sends a message. `clientSeq` and `requestId` are filled in when
    /// omitted, and any string `"@alias"` is replaced by the identifier
    /// bound to that alias. Identifiers created by this step are bound to
    /// the names in `bind`, in creation order.
    Send {
        client: String,
        message: Value,
        #[serde(default)]
        bind: Vec<String>,
    },
    /// Sends one fixture audio chunk (`fixture:<tag>`).
    Audio { client: String, tag: String },
    /// Advances the simulated clock.
    Tick { ms: u64 },
    /// Fails the run unless a message the client received (of `type`, when
    /// given) contains the text.
    Expect {
        client: String,
        contains: String,
        #[serde(default, rename = "type")]
        message_type: Option<String>,
    },
    Leave { client: String },
}

impl ReplayScript {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ServerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServerError::Replay(format!("{}: {e}", path.display())))?;
        let script: ReplayScript = serde_json::from_str(&text)
            .map_err(|e| ServerError::Replay(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((script, dir))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    /// Canonical JSON of the final state.
    pub final_state: String,
    pub revision: u64,
    /// Every message each client received, as wire JSON, in order.
    pub received: BTreeMap<String, Vec<String>>,
    pub failures: Vec<String>,
    /// `Some(matched)` when the script names a golden file.
    pub golden_match: Option<bool>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.golden_match != Some(false)
    }
}

struct VirtualClient {
    tx: FrameSender<ClientMessage>,
    rx: FrameReceiver<ServerMessage>,
    received: Vec<ServerMessage>,
    next_seq: u64,
    next_ping: u64,
}

impl VirtualClient {
    async fn send(&mut self, msg: &ClientMessage) -> Result<(), ServerError> {
        self.tx.send(msg).await.map_err(|e| ServerError::Replay(e.to_string()))
    }

    /// Pings and reads until the matching pong, so everything the server
    /// queued for this client before the ping has arrived.
    async fn drain(&mut self) -> Result<(), ServerError> {
        self.next_ping += 1;
        let nonce = self.next_ping;
        self.send(&ClientMessage::Ping { nonce }).await?;
        loop {
            match self.rx.recv().await {
                Some(Ok(ServerMessage::Pong { nonce: n })) if n == nonce => return Ok(()),
                Some(Ok(msg)) => self.received.push(msg),
                Some(Err(e)) => return Err(ServerError::Replay(e.to_string())),
                None => return Err(ServerError::Replay("connection closed".into())),
            }
        }
    }
}

fn substitute(value: &mut Value, aliases: &BTreeMap<String, String>) -> Result<(), ServerError> {
    match value {
        Value::String(s) if s.starts_with('@') => {
            let id = aliases
                .get(&s[1..])
                .ok_or_else(|| ServerError::Replay(format!("unbound alias {s}")))?;
            *s = id.clone();
        }
        Value::Array(items) => {
            for v in items {
                substitute(v, aliases)?;
            }
        }
        Value::Object(map) => {
            for v in map.values_mut() {
                substitute(v, aliases)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn created_ids(msgs: &[ServerMessage]) -> Vec<String> {
    let mut ids = Vec::new();
    for msg in msgs {
        if let ServerMessage::MutationApplied { events, .. } = msg {
            for e in events {
                match e {
                    Event::NoteCreated { note } => ids.push(note.to_string()),
                    Event::GroupCreated { group } => ids.push(group.to_string()),
                    Event::LensInstalled { lens } => ids.push(lens.to_string()),
                    _ => {}
                }
            }
        }
    }
    ids
}

fn message_type(msg: &ServerMessage) -> String {
    serde_json::to_value(msg)
        .ok()
        .and_then(|v| v.get("type").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_default()
}

struct Runner {
    hub: Hub,
    handle: WorkspaceHandle,
    workspace: WorkspaceId,
    clock: SimClock,
    clients: BTreeMap<String, VirtualClient>,
    aliases: BTreeMap<String, String>,
    next_request: u64,
    failures: Vec<String>,
}

impl Runner {
    fn client(&mut self, name: &str) -> Result<&mut VirtualClient, ServerError> {
        self.clients
            .get_mut(name)
            .ok_or_else(|| ServerError::Replay(format!("client {name} has not joined")))
    }

    async fn settle(&mut self) -> Result<(), ServerError> {
        self.handle.wait_idle().await?;
        for c in self.clients.values_mut() {
            c.drain().await?;
        }
        Ok(())
    }

    /// Sends and waits until the server has processed the message and
    /// every consequence of it has been delivered.
    async fn send(&mut self, name: &str, msg: ClientMessage) -> Result<Vec<ServerMessage>, ServerError> {
        let client = self.client(name)?;
        let mark = client.received.len();
        client.send(&msg).await?;
        client.drain().await?;
        self.settle().await?;
        Ok(self.clients[name].received[mark..].to_vec())
    }

    async fn step(&mut self, index: usize, step: &Step) -> Result<(), ServerError> {
        match step {
            Step::Join { client } => {
                if self.clients.contains_key(client) {
                    return Err(ServerError::Replay(format!("client {client} joined twice")));
                }
                let (client_end, server_end) = loopback();
                let hub = self.hub.clone();
                tokio::spawn(async move { hub.serve_framed(server_end).await });
                let (tx, rx) = client_end.split();
                let mut vc = VirtualClient { tx, rx, received: Vec::new(), next_seq: 1, next_ping: 0 };
                vc.send(&ClientMessage::Join {
                    workspace: self.workspace.clone(),
                    user: UserId::new(client.clone()),
                })
                .await?;
                vc.drain().await?;
                self.clients.insert(client.clone(), vc);
            }
            Step::Send { client, message, bind } => {
                let mut message = message.clone();
                substitute(&mut message, &self.aliases)?;
                if let Value::Object(map) = &mut message {
                    match map.get("type").and_then(Value::as_str) {
                        Some("submitMutation") if !map.contains_key("clientSeq") => {
                            let c = self.client(client)?;
                            map.insert("clientSeq".into(), c.next_seq.into());
                            c.next_seq += 1;
                        }
                        Some("aiRequest") if !map.contains_key("requestId") => {
                            self.next_request += 1;
                            map.insert("requestId".into(), format!("req-{}", self.next_request).into());
                        }
                        _ => {}
                    }
                }
                if let Some(ClientMessage::SubmitMutation { client_seq, .. }) =
                    serde_json::from_value::<ClientMessage>(message.clone()).ok().as_ref()
                {
                    let c = self.client(client)?;
                    c.next_seq = c.next_seq.max(client_seq + 1);
                }
                let msg: ClientMessage = serde_json::from_value(message)
                    .map_err(|e| ServerError::Replay(format!("step {index}: {e}")))?;
                let got = self.send(client, msg).await?;
                let ids = created_ids(&got);
                if ids.len() < bind.len() {
                    return Err(ServerError::Replay(format!(
                        "step {index}: {} identifiers to bind, {} created",
                        bind.len(),
                        ids.len()
                    )));
                }
                for (alias, id) in bind.iter().zip(ids) {
                    self.aliases.insert(alias.clone(), id);
                }
            }
            Step::Audio { client, tag } => {
                let data = base64::engine::general_purpose::STANDARD.encode(MockProvider::audio_chunk(tag));
                self.send(client, ClientMessage::AudioChunk { data }).await?;
            }
            Step::Tick { ms } => {
                self.clock.advance(*ms);
                self.handle.tick().await?;
                self.settle().await?;
            }
            Step::Expect { client, contains, message_type: ty } => {
                let found = self.client(client)?.received.iter().any(|m| {
                    ty.as_ref().is_none_or(|t| *t == message_type(m)) && encode(m).contains(contains.as_str())
                });
                if !found {
                    self.failures.push(format!(
                        "step {index}: {client} never received {}{contains:?}",
                        ty.as_ref().map(|t| format!("a {t} containing ")).unwrap_or_default()
                    ));
                }
            }
            Step::Leave { client } => {
                let mut c = self
                    .clients
                    .remove(client)
                    .ok_or_else(|| ServerError::Replay(format!("client {client} has not joined")))?;
                let _ = c.tx.close().await;
                // Wait for the server side to notice before going on.
                while c.rx.recv().await.is_some() {}
            }
        }
        Ok(())
    }
}

/// Runs a script against `gateway` (normally the mock provider) with a
/// fresh workspace on a simulated clock.
pub async fn run_script(
    script: &ReplayScript,
    base_dir: &Path,
    gateway: Gateway,
    store: Arc<dyn SnapshotStore>,
) -> Result<ReplayReport, ServerError> {
    let clock = SimClock::new(script.start_ms);
    let shared: Arc<dyn Clock> = Arc::new(clock.clone());
    let hub = Hub::new(
        gateway,
        store,
        shared,
        HubOptions {
            auto_create: true,
            ticking: Ticking::Manual,
            expire_idle: false,
            seed: Some(script.seed),
            hint_interval_ms: script.hint_interval_ms,
        },
    );
    let workspace = WorkspaceId::new(script.workspace.clone());
    let (handle, _) = hub.create(&workspace);
    let mut runner = Runner {
        hub: hub.clone(),
        handle,
        workspace,
        clock,
        clients: BTreeMap::new(),
        aliases: BTreeMap::new(),
        next_request: 0,
        failures: Vec::new(),
    };
    for (i, step) in script.steps.iter().enumerate() {
        runner.step(i, step).await?;
    }
    let state = runner.handle.state().await?;
    let final_state = to_canonical_json(&state);
    let golden_match = match &script.golden {
        Some(path) => {
            let path = base_dir.join(path);
            let expected = std::fs::read_to_string(&path)
                .map_err(|e| ServerError::Replay(format!("{}: {e}", path.display())))?;
            Some(expected.trim_end() == final_state.trim_end())
        }
        None => None,
    };
    let received = runner
        .clients
        .iter()
        .map(|(name, c)| (name.clone(), c.received.iter().map(encode).collect()))
        .collect();
    hub.shutdown().await;
    Ok(ReplayReport {
        final_state,
        revision: state.revision,
        received,
        failures: runner.failures,
        golden_match,
    })
}
