use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use futures::{Sink, SinkExt, Stream, StreamExt};
use tokio::task::JoinHandle;
use tracing::{debug, info};

use super::actor::{self, ActorOptions, ActorParts, Ticking, WorkspaceHandle, WorkspaceInfo};
use super::ServerError;
use crate::clock::Clock;
use crate::gateway::Gateway;
use crate::ids::{IdMint, UserId, WorkspaceId};
use crate::snapshot::SnapshotStore;
use crate::sync::protocol::{ClientMessage, ProtocolError, ServerMessage};
use crate::sync::transport::ServerConn;
use crate::workspace::WorkspaceState;

#[derive(Debug, Clone)]
pub struct HubOptions {
    /// Create workspaces on first join.
    pub auto_create: bool,
    pub ticking: Ticking,
    pub expire_idle: bool,
    /// Seed for identifier minting; random per workspace when absent.
    pub seed: Option<u64>,
    /// Refresh interval given to new workspaces.
    pub hint_interval_ms: u64,
}

impl Default for HubOptions {
    fn default() -> Self {
        Self {
            auto_create: true,
            ticking: Ticking::Timer,
            expire_idle: true,
            seed: None,
            hint_interval_ms: 10_000,
        }
    }
}

struct Running {
    handle: WorkspaceHandle,
    task: JoinHandle<()>,
}

struct HubInner {
    gateway: Gateway,
    store: Arc<dyn SnapshotStore>,
    clock: Arc<dyn Clock>,
    options: HubOptions,
    workspaces: Mutex<BTreeMap<WorkspaceId, Running>>,
}

/// Registry of running workspaces.
#[derive(Clone)]
pub struct Hub {
    inner: Arc<HubInner>,
}

impl Hub {
    pub fn new(gateway: Gateway, store: Arc<dyn SnapshotStore>, clock: Arc<dyn Clock>, options: HubOptions) -> Self {
        Self {
            inner: Arc::new(HubInner {
                gateway,
                store,
                clock,
                options,
                workspaces: Mutex::new(BTreeMap::new()),
            }),
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.inner.gateway
    }

    pub fn store(&self) -> &Arc<dyn SnapshotStore> {
        &self.inner.store
    }

    pub fn options(&self) -> &HubOptions {
        &self.inner.options
    }

    /// Starts the workspace if needed. Returns whether it was created.
    pub fn create(&self, id: &WorkspaceId) -> (WorkspaceHandle, bool) {
        let mut map = self.inner.workspaces.lock().expect("hub lock");
        if let Some(r) = map.get(id) {
            return (r.handle.clone(), false);
        }
        let inner = &self.inner;
        let mut state = WorkspaceState::new(id.clone());
        state.settings.hint_refresh_interval_ms = inner.options.hint_interval_ms;
        let mint = match inner.options.seed {
            Some(seed) => IdMint::new(inner.clock.clone(), seed),
            None => IdMint::from_entropy(inner.clock.clone()),
        };
        let (handle, task) = actor::spawn(ActorParts {
            state,
            mint,
            clock: inner.clock.clone(),
            gateway: inner.gateway.for_workspace(id),
            store: inner.store.clone(),
            options: ActorOptions {
                ticking: inner.options.ticking,
                expire_idle: inner.options.expire_idle,
            },
        });
        info!(workspace = %id, "workspace created");
        map.insert(id.clone(), Running { handle: handle.clone(), task });
        (handle, true)
    }

    pub fn get(&self, id: &WorkspaceId) -> Option<WorkspaceHandle> {
        self.inner.workspaces.lock().expect("hub lock").get(id).map(|r| r.handle.clone())
    }

    /// Existing workspace, or a new one when auto-creation is on.
    pub fn resolve(&self, id: &WorkspaceId) -> Result<WorkspaceHandle, ServerError> {
        if let Some(h) = self.get(id) {
            return Ok(h);
        }
        if self.inner.options.auto_create {
            Ok(self.create(id).0)
        } else {
            Err(ServerError::UnknownWorkspace(id.to_string()))
        }
    }

    pub fn handles(&self) -> Vec<WorkspaceHandle> {
        self.inner
            .workspaces
            .lock()
            .expect("hub lock")
            .values()
            .map(|r| r.handle.clone())
            .collect()
    }

    pub async fn list(&self) -> Vec<WorkspaceInfo> {
        let mut out = Vec::new();
        for h in self.handles() {
            if let Ok(info) = h.info().await {
                out.push(info);
            }
        }
        out
    }

    /// Stops every workspace and waits for the actors to finish.
    pub async fn shutdown(&self) {
        let running: Vec<Running> = {
            let mut map = self.inner.workspaces.lock().expect("hub lock");
            std::mem::take(&mut *map).into_values().collect()
        };
        for r in &running {
            r.handle.shutdown();
        }
        for r in running {
            let _ = r.task.await;
        }
    }

    /// Serves one framed in-process connection until either side closes.
    pub async fn serve_framed(&self, conn: ServerConn) {
        let (sink, stream) = conn.into_parts();
        self.serve(None, stream, sink).await
    }

    /// Drives one client connection. With `preset` the session joins
    /// immediately; otherwise the first message must be `join`.
    pub async fn serve<St, Si>(&self, preset: Option<(WorkspaceId, UserId)>, mut inbound: St, mut outbound: Si)
    where
        St: Stream<Item = Result<ClientMessage, ProtocolError>> + Unpin,
        Si: Sink<ServerMessage> + Unpin,
    {
        let error = |code: &str, detail: String| ServerMessage::Error {
            code: code.into(),
            detail,
            client_seq: None,
            request_id: None,
        };
        let (workspace, user) = match preset {
            Some(p) => p,
            None => loop {
                match inbound.next().await {
                    None => return,
                    Some(Ok(ClientMessage::Join { workspace, user })) => break (workspace, user),
                    Some(Ok(_)) => {
                        let _ = outbound.send(error("NotJoined", "the first message must be join".into())).await;
                    }
                    Some(Err(e)) => {
                        let _ = outbound.send(error(e.code(), e.to_string())).await;
                    }
                }
            },
        };
        let handle = match self.resolve(&workspace) {
            Ok(h) => h,
            Err(e) => {
                let _ = outbound.send(error(e.code(), e.to_string())).await;
                return;
            }
        };
        let Ok((session, mut outbox)) = handle.join(user).await else {
            return;
        };
        loop {
            tokio::select! {
                msg = outbox.recv() => match msg {
                    Some(msg) => {
                        if outbound.send(msg).await.is_err() {
                            break;
                        }
                    }
                    None => break,
                },
                frame = inbound.next() => match frame {
                    Some(Ok(msg)) => {
                        if handle.send(&session, msg).is_err() {
                            break;
                        }
                    }
                    Some(Err(e)) => {
                        if outbound.send(error(e.code(), e.to_string())).await.is_err() {
                            break;
                        }
                    }
                    None => break,
                },
            }
        }
        debug!(%session, "connection closed");
        handle.leave(&session);
        let _ = outbound.close().await;
    }
}
