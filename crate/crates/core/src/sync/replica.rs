//! Client-side mirror of a workspace, kept in step with the server's
//! broadcast stream.

use std::collections::BTreeMap;

use super::protocol::{ClientMessage, ServerMessage};
use crate::ids::{SessionId, UserId};
use crate::workspace::{from_canonical_value, CanonicalError, Mutation, MutationKind, Revision, WorkspaceError, WorkspaceState};

#[derive(Debug, thiserror::Error)]
pub enum ReplicaError {
    #[error("message before joinSnapshot")]
    NotJoined,
    #[error("revision gap: at {have}, received {got}")]
    Gap { have: Revision, got: Revision },
    #[error("broadcast mutation failed to apply: {0}")]
    Diverged(#[from] WorkspaceError),
    #[error("bad snapshot: {0}")]
    Snapshot(#[from] CanonicalError),
}

/// Confirmed state plus the client's own unacknowledged submissions.
#[derive(Debug, Clone)]
pub struct ClientReplica {
    user: UserId,
    session: Option<SessionId>,
    state: Option<WorkspaceState>,
    pending: BTreeMap<u64, MutationKind>,
    next_seq: u64,
    rejected: Vec<(u64, String)>,
}

impl ClientReplica {
    pub fn new(user: impl Into<UserId>) -> Self {
        Self {
            user: user.into(),
            session: None,
            state: None,
            pending: BTreeMap::new(),
            next_seq: 1,
            rejected: Vec::new(),
        }
    }

    pub fn user(&self) -> &UserId {
        &self.user
    }

    pub fn session(&self) -> Option<&SessionId> {
        self.session.as_ref()
    }

    /// The state as confirmed by the server.
    pub fn state(&self) -> Option<&WorkspaceState> {
        self.state.as_ref()
    }

    pub fn revision(&self) -> Option<Revision> {
        self.state.as_ref().map(|s| s.revision)
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// `(clientSeq, code)` of submissions the server refused.
    pub fn rejected(&self) -> &[(u64, String)] {
        &self.rejected
    }

    /// Builds the next `submitMutation` and remembers it until acked.
    pub fn submit(&mut self, op: MutationKind) -> ClientMessage {
        let client_seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert(client_seq, op.clone());
        ClientMessage::SubmitMutation { client_seq, mutation: op }
    }

    /// Confirmed state with pending edits applied on top, for display.
    /// Pending creates have no identifier yet and are left out.
    pub fn optimistic(&self) -> Option<WorkspaceState> {
        let mut view = self.state.clone()?;
        for op in self.pending.values() {
            // Failures here are expected when a concurrent change won.
            let _ = view.apply(&Mutation::new(self.user.clone(), op.clone()));
        }
        Some(view)
    }

    pub fn handle(&mut self, msg: &ServerMessage) -> Result<(), ReplicaError> {
        match msg {
            ServerMessage::JoinSnapshot { session, state, .. } => {
                self.session = Some(session.clone());
                self.state = Some(from_canonical_value(state.clone())?);
            }
            ServerMessage::MutationApplied { revision, actor, mutation, .. } => {
                let state = self.state.as_mut().ok_or(ReplicaError::NotJoined)?;
                if *revision != state.revision + 1 {
                    return Err(ReplicaError::Gap { have: state.revision, got: *revision });
                }
                state.apply(&Mutation::new(actor.clone(), mutation.clone()))?;
            }
            ServerMessage::Ack { client_seq, .. } => {
                self.pending.remove(client_seq);
            }
            ServerMessage::Error { client_seq: Some(seq), code, .. } => {
                self.pending.remove(seq);
                self.rejected.push((*seq, code.clone()));
            }
            _ => {}
        }
        Ok(())
    }
}
