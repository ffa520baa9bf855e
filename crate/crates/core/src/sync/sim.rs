//! Deterministic simulation of several clients talking to one sequencer
//! over links that deliver in order per direction but interleave
//! arbitrarily across clients. A seed fixes every choice.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::protocol::{ClientMessage, ServerMessage};
use super::replica::{ClientReplica, ReplicaError};
use super::sequencer::Sequencer;
use crate::clock::{Clock, SimClock};
use crate::ids::{IdMint, SessionId, UserId, WorkspaceId};
use crate::workspace::{to_canonical_json, MutationKind, Page, Position, WorkspaceState};

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub clients: usize,
    pub ops_per_client: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimReport {
    pub final_revision: u64,
    pub acked: usize,
    pub rejected: usize,
    /// Canonical JSON of the server state.
    pub server_json: String,
    /// Canonical JSON of each replica after the run.
    pub replica_json: Vec<String>,
}

impl SimReport {
    pub fn converged(&self) -> bool {
        self.replica_json.iter().all(|r| *r == self.server_json)
    }
}

struct SimClient {
    replica: ClientReplica,
    session: SessionId,
    uplink: VecDeque<ClientMessage>,
    downlink: VecDeque<ServerMessage>,
    remaining: usize,
    acked: usize,
}

const WORDS: &[&str] = &[
    "Airbnb", "budget", "flight", "museum", "beach", "rental car", "hostel", "train pass",
    "room cleaning", "street food", "guided tour", "travel insurance", "late checkout",
];

/// A plausible edit against `state` (possibly stale; the server may refuse it).
pub fn random_op(rng: &mut impl Rng, state: &WorkspaceState) -> MutationKind {
    let notes: Vec<_> = state.notes.values().filter(|n| n.page == Page::Main).collect();
    let groups: Vec<_> = state.groups.values().filter(|g| g.page == Page::Main).collect();
    let word = |rng: &mut dyn rand::RngCore| WORDS[rng.random_range(0..WORDS.len())];
    let pos = |rng: &mut dyn rand::RngCore| {
        Position::new(rng.random_range(-20..20) as f64, rng.random_range(-20..20) as f64)
    };
    let roll = rng.random_range(0..100);
    if notes.is_empty() || roll < 30 {
        let group = if !groups.is_empty() && rng.random_bool(0.3) {
            Some(groups[rng.random_range(0..groups.len())].id.clone())
        } else {
            None
        };
        return MutationKind::CreateNote {
            id: None,
            text: format!("{} {}", word(rng), rng.random_range(0..100)),
            position: pos(rng),
            page: Page::Main,
            provenance: Default::default(),
            group,
        };
    }
    let note = notes[rng.random_range(0..notes.len())].id.clone();
    match roll {
        30..=44 => MutationKind::EditNoteText { note, text: format!("{} {}", word(rng), rng.random_range(0..100)) },
        45..=57 => MutationKind::MoveNote { note, position: pos(rng) },
        58..=63 => MutationKind::DeleteNote { note },
        64..=73 => {
            let parent = if !groups.is_empty() && rng.random_bool(0.3) {
                Some(groups[rng.random_range(0..groups.len())].id.clone())
            } else {
                None
            };
            MutationKind::CreateGroup {
                id: None,
                title: word(rng).to_string(),
                page: Page::Main,
                parent,
                position: pos(rng),
                rationale: None,
                members: vec![note],
            }
        }
        _ if groups.is_empty() => MutationKind::MoveNote { note, position: pos(rng) },
        74..=83 => MutationKind::AssignNoteToGroup {
            note,
            group: groups[rng.random_range(0..groups.len())].id.clone(),
        },
        84..=88 => MutationKind::RemoveNoteFromGroup { note },
        89..=93 => MutationKind::RenameGroup {
            group: groups[rng.random_range(0..groups.len())].id.clone(),
            title: word(rng).to_string(),
        },
        94..=96 => MutationKind::PromoteSubgroup {
            group: groups[rng.random_range(0..groups.len())].id.clone(),
        },
        _ => MutationKind::DeleteGroup {
            group: groups[rng.random_range(0..groups.len())].id.clone(),
        },
    }
}

pub struct SimNetwork {
    sequencer: Sequencer,
    clients: Vec<SimClient>,
    rng: ChaCha20Rng,
    clock: SimClock,
}

impl SimNetwork {
    pub fn new(config: SimConfig) -> Self {
        let clock = SimClock::new(1_700_000_000_000);
        let shared: Arc<dyn Clock> = Arc::new(clock.clone());
        let mut sequencer = Sequencer::new(
            WorkspaceState::new(WorkspaceId::new("sim")),
            IdMint::new(shared.clone(), config.seed),
            shared,
        );
        let clients = (0..config.clients)
            .map(|i| {
                let user = UserId::new(format!("user{i}"));
                let (session, out) = sequencer.join(user.clone());
                SimClient {
                    replica: ClientReplica::new(user),
                    session,
                    uplink: VecDeque::new(),
                    downlink: out.into_iter().map(|o| o.msg).collect(),
                    remaining: config.ops_per_client,
                    acked: 0,
                }
            })
            .collect();
        Self {
            sequencer,
            clients,
            rng: ChaCha20Rng::seed_from_u64(config.seed),
            clock,
        }
    }

    pub fn server_state(&self) -> &WorkspaceState {
        self.sequencer.state()
    }

    fn idle(&self) -> bool {
        self.clients
            .iter()
            .all(|c| c.remaining == 0 && c.uplink.is_empty() && c.downlink.is_empty())
    }

    /// One random event: a client edits, the server takes one inbound
    /// message, or a client takes one outbound message.
    fn step(&mut self) -> Result<(), ReplicaError> {
        let n = self.clients.len();
        let i = self.rng.random_range(0..n);
        match self.rng.random_range(0..3) {
            0 if self.clients[i].remaining > 0 && self.clients[i].replica.state().is_some() => {
                let c = &mut self.clients[i];
                let op = random_op(&mut self.rng, c.replica.state().expect("joined"));
                let msg = c.replica.submit(op);
                c.uplink.push_back(msg);
                c.remaining -= 1;
            }
            1 => {
                let Some(msg) = self.clients[i].uplink.pop_front() else { return Ok(()) };
                self.clock.advance(1);
                let session = self.clients[i].session.clone();
                let out = match msg {
                    ClientMessage::SubmitMutation { client_seq, mutation } => {
                        self.sequencer.submit(&session, client_seq, mutation)
                    }
                    _ => Vec::new(),
                };
                for o in out {
                    if let Some(c) = self.clients.iter_mut().find(|c| c.session == o.to) {
                        c.downlink.push_back(o.msg);
                    }
                }
            }
            _ => {
                let c = &mut self.clients[i];
                if let Some(msg) = c.downlink.pop_front() {
                    if matches!(msg, ServerMessage::Ack { .. }) {
                        c.acked += 1;
                    }
                    c.replica.handle(&msg)?;
                }
            }
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<SimReport, ReplicaError> {
        while !self.idle() {
            self.step()?;
        }
        Ok(SimReport {
            final_revision: self.sequencer.revision(),
            acked: self.clients.iter().map(|c| c.acked).sum(),
            rejected: self.clients.iter().map(|c| c.replica.rejected().len()).sum(),
            server_json: to_canonical_json(self.sequencer.state()),
            replica_json: self
                .clients
                .iter()
                .map(|c| c.replica.state().map(to_canonical_json).unwrap_or_default())
                .collect(),
        })
    }
}

/// Runs one seeded simulation to completion.
pub fn simulate(config: SimConfig) -> Result<SimReport, ReplicaError> {
    SimNetwork::new(config).run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_converges_and_is_reproducible() {
        let config = SimConfig { clients: 3, ops_per_client: 40, seed: 11 };
        let a = simulate(config).unwrap();
        assert!(a.converged());
        assert_eq!(a.acked + a.rejected, 120);
        assert_eq!(a.final_revision as usize, a.acked);
        assert_eq!(a, simulate(config).unwrap());
    }
}
