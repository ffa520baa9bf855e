//! Server-side total order for one workspace, with no I/O.
//!
//! The sequencer owns the authoritative state. Each accepted mutation gets
//! the next revision, is broadcast to every session as `mutationApplied`,
//! and is acknowledged to its submitter. Outputs are returned as
//! [`Outgoing`] values for the caller to deliver; per-session FIFO delivery
//! of those values is all the transport has to guarantee.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::protocol::{state_document, AiOutcome, ServerMessage};
use crate::clock::Clock;
use crate::ids::{IdMint, SessionId, UserId};
use crate::workspace::{
    color_for_user, Event, Mutation, MutationKind, Revision, WorkspaceError, WorkspaceState,
};

/// Sessions silent for longer than this are dropped.
pub const HEARTBEAT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub to: SessionId,
    pub msg: ServerMessage,
}

#[derive(Debug, Clone)]
pub struct SessionInfo {
    pub user: UserId,
    pub last_seen_ms: u64,
    /// Highest clientSeq seen from this session.
    pub last_client_seq: Option<u64>,
}

#[derive(Debug)]
pub struct Sequencer {
    state: WorkspaceState,
    mint: IdMint,
    clock: Arc<dyn Clock>,
    sessions: BTreeMap<SessionId, SessionInfo>,
}

/// Kinds only the server itself may issue.
fn server_only(op: &MutationKind) -> bool {
    matches!(
        op,
        MutationKind::ReplaceRelationHints { .. }
            | MutationKind::SetRecording { .. }
            | MutationKind::RestoreState { .. }
    )
}

fn error_msg(code: &str, detail: impl Into<String>, client_seq: Option<u64>, request_id: Option<String>) -> ServerMessage {
    ServerMessage::Error {
        code: code.into(),
        detail: detail.into(),
        client_seq,
        request_id,
    }
}

impl Sequencer {
    pub fn new(state: WorkspaceState, mint: IdMint, clock: Arc<dyn Clock>) -> Self {
        Self {
            state,
            mint,
            clock,
            sessions: BTreeMap::new(),
        }
    }

    pub fn state(&self) -> &WorkspaceState {
        &self.state
    }

    pub fn revision(&self) -> Revision {
        self.state.revision
    }

    pub fn mint(&mut self) -> &mut IdMint {
        &mut self.mint
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn sessions(&self) -> &BTreeMap<SessionId, SessionInfo> {
        &self.sessions
    }

    pub fn session_user(&self, session: &SessionId) -> Option<&UserId> {
        self.sessions.get(session).map(|s| &s.user)
    }

    fn snapshot_for(&self, session: &SessionId, user: &UserId) -> ServerMessage {
        ServerMessage::JoinSnapshot {
            session: session.clone(),
            user: user.clone(),
            color: color_for_user(&self.state, user).0.to_string(),
            revision: self.state.revision,
            state: state_document(&self.state),
        }
    }

    /// Registers a session and returns it with its `joinSnapshot`.
    pub fn join(&mut self, user: UserId) -> (SessionId, Vec<Outgoing>) {
        let session = self.mint.session();
        let msg = self.snapshot_for(&session, &user);
        self.sessions.insert(
            session.clone(),
            SessionInfo {
                user,
                last_seen_ms: self.clock.now_ms(),
                last_client_seq: None,
            },
        );
        (session.clone(), vec![Outgoing { to: session, msg }])
    }

    pub fn leave(&mut self, session: &SessionId) -> bool {
        self.sessions.remove(session).is_some()
    }

    /// Records inbound traffic from a session.
    pub fn touch(&mut self, session: &SessionId) {
        let now = self.clock.now_ms();
        if let Some(info) = self.sessions.get_mut(session) {
            info.last_seen_ms = now;
        }
    }

    /// Drops sessions that have been silent past the heartbeat timeout.
    pub fn expire_idle(&mut self) -> Vec<SessionId> {
        let now = self.clock.now_ms();
        let expired: Vec<SessionId> = self
            .sessions
            .iter()
            .filter(|(_, info)| now.saturating_sub(info.last_seen_ms) > HEARTBEAT_TIMEOUT_MS)
            .map(|(id, _)| id.clone())
            .collect();
        for id in &expired {
            self.sessions.remove(id);
        }
        expired
    }

    /// Fills in server-minted identifiers. Client-supplied ones are
    /// replaced so identifiers stay unique and ordered.
    fn stamp(&mut self, op: MutationKind) -> MutationKind {
        match op {
            MutationKind::CreateNote { text, position, page, provenance, group, .. } => {
                MutationKind::CreateNote {
                    id: Some(self.mint.note()),
                    text,
                    position,
                    page,
                    provenance,
                    group,
                }
            }
            MutationKind::CreateGroup { title, page, parent, position, rationale, members, .. } => {
                MutationKind::CreateGroup {
                    id: Some(self.mint.group()),
                    title,
                    page,
                    parent,
                    position,
                    rationale,
                    members,
                }
            }
            MutationKind::InstallLensPage { mut lens, mut page } => {
                let id = self.mint.lens();
                lens.id = id.clone();
                page.lens = id;
                MutationKind::InstallLensPage { lens, page }
            }
            other => other,
        }
    }

    /// Applies a mutation in the next revision slot and broadcasts it.
    /// Identifiers already present on server-issued creates are kept.
    fn commit(
        &mut self,
        actor: UserId,
        op: MutationKind,
        restamp: bool,
    ) -> Result<(Revision, Vec<Event>, Vec<Outgoing>), WorkspaceError> {
        let op = if restamp || needs_stamp(&op) { self.stamp(op) } else { op };
        let mutation = Mutation::new(actor, op);
        let events = self.state.apply(&mutation)?;
        let revision = self.state.revision;
        let msg = ServerMessage::MutationApplied {
            revision,
            actor: mutation.actor,
            mutation: mutation.op,
            events: events.clone(),
        };
        let out = self.broadcast(msg);
        Ok((revision, events, out))
    }

    /// Handles `submitMutation`: exactly one `ack` or `error` goes back to
    /// the submitter; on success every session also gets `mutationApplied`.
    pub fn submit(&mut self, session: &SessionId, client_seq: u64, op: MutationKind) -> Vec<Outgoing> {
        self.touch(session);
        let reject = |code: &str, detail: String| {
            vec![Outgoing {
                to: session.clone(),
                msg: error_msg(code, detail, Some(client_seq), None),
            }]
        };
        let Some(info) = self.sessions.get_mut(session) else {
            return Vec::new();
        };
        if info.last_client_seq.is_some_and(|last| client_seq <= last) {
            return reject(
                "StaleClientSeq",
                format!("clientSeq {client_seq} is not above {}", info.last_client_seq.unwrap_or(0)),
            );
        }
        info.last_client_seq = Some(client_seq);
        let actor = info.user.clone();
        if server_only(&op) {
            return reject("Forbidden", format!("{} is issued by the server only", op.name()));
        }
        match self.commit(actor, op, true) {
            Ok((revision, _, mut out)) => {
                out.push(Outgoing {
                    to: session.clone(),
                    msg: ServerMessage::Ack { client_seq, revision },
                });
                out
            }
            Err(e) => reject(e.code(), e.to_string()),
        }
    }

    /// Applies a server-side mutation (AI results, scheduler, recording)
    /// attributed to `actor`.
    pub fn apply_as(
        &mut self,
        actor: UserId,
        op: MutationKind,
    ) -> Result<(Revision, Vec<Event>, Vec<Outgoing>), WorkspaceError> {
        self.commit(actor, op, false)
    }

    /// Applies several server-side mutations in consecutive revisions.
    /// All or nothing: the batch is first tried on a copy of the state.
    pub fn apply_batch(
        &mut self,
        actor: &UserId,
        ops: Vec<MutationKind>,
    ) -> Result<(Vec<Revision>, Vec<Outgoing>), WorkspaceError> {
        let ops: Vec<MutationKind> = ops
            .into_iter()
            .map(|op| if needs_stamp(&op) { self.stamp(op) } else { op })
            .collect();
        let mut trial = self.state.clone();
        for op in &ops {
            trial.apply(&Mutation::new(actor.clone(), op.clone()))?;
        }
        let mut revisions = Vec::new();
        let mut out = Vec::new();
        for op in ops {
            let (rev, _, msgs) = self.commit(actor.clone(), op, false)?;
            revisions.push(rev);
            out.extend(msgs);
        }
        Ok((revisions, out))
    }

    /// Replaces the content wholesale and re-sends `joinSnapshot` to every
    /// session instead of a `mutationApplied` carrying the whole state.
    pub fn restore(&mut self, actor: UserId, state: WorkspaceState) -> Result<(Revision, Vec<Outgoing>), WorkspaceError> {
        let mutation = Mutation::new(actor, MutationKind::RestoreState { state: Box::new(state) });
        self.state.apply(&mutation)?;
        let out = self
            .sessions
            .iter()
            .map(|(id, info)| Outgoing {
                to: id.clone(),
                msg: self.snapshot_for(id, &info.user),
            })
            .collect();
        Ok((self.state.revision, out))
    }

    pub fn broadcast(&self, msg: ServerMessage) -> Vec<Outgoing> {
        self.sessions
            .keys()
            .map(|id| Outgoing { to: id.clone(), msg: msg.clone() })
            .collect()
    }

    /// An AI result goes to every session, tagged with the revision it was
    /// computed against.
    pub fn broadcast_ai_result(
        &self,
        request_id: &str,
        kind: &str,
        requested_by: &UserId,
        base_revision: Revision,
        result: AiOutcome,
    ) -> Vec<Outgoing> {
        self.broadcast(ServerMessage::AiResult {
            request_id: request_id.to_string(),
            kind: kind.to_string(),
            requested_by: requested_by.clone(),
            base_revision,
            result,
        })
    }

    pub fn reply_error(&self, session: &SessionId, code: &str, detail: impl Into<String>, request_id: Option<String>) -> Vec<Outgoing> {
        vec![Outgoing {
            to: session.clone(),
            msg: error_msg(code, detail, None, request_id),
        }]
    }
}

fn needs_stamp(op: &MutationKind) -> bool {
    matches!(
        op,
        MutationKind::CreateNote { id: None, .. } | MutationKind::CreateGroup { id: None, .. }
    )
}
