//! One task per workspace. It owns the sequencer, the relation-hint
//! schedule, the recorder and the latest lens candidates; everything that
//! touches workspace state goes through its command queue, and provider
//! calls run in spawned tasks that report back through the same queue.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use base64::Engine;
use tokio::sync::{mpsc, oneshot};
use tracing::{debug, info, warn};

use super::ServerError;
use crate::affinity::{self, Refined};
use crate::clock::Clock;
use crate::error::AiError;
use crate::gateway::ScopedGateway;
use crate::ideation;
use crate::ids::{IdMint, LensId, RecordingId, SessionId, UserId, WorkspaceId};
use crate::relations::{self, HintScheduler, TickDecision};
use crate::snapshot::{SnapshotMeta, SnapshotStore};
use crate::speech::{self, ChunkSlot, Recorder, Transcript};
use crate::sync::protocol::{AiOutcome, AiRequest, ClientMessage, ServerMessage};
use crate::sync::sequencer::{Outgoing, Sequencer};
use crate::workspace::{system_actor, LensCandidate, MutationKind, RelationHint, Revision, WorkspaceState};

/// How the hint schedule and heartbeat expiry learn that time passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ticking {
    /// A timer wakes the actor.
    Timer,
    /// Only explicit [`WorkspaceHandle::tick`] calls do (simulated clocks).
    Manual,
}

#[derive(Debug, Clone, Copy)]
pub struct ActorOptions {
    pub ticking: Ticking,
    pub expire_idle: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceInfo {
    pub id: WorkspaceId,
    pub revision: Revision,
    pub sessions: usize,
}

type Reply<T> = oneshot::Sender<T>;

enum Completed {
    Outcome(AiOutcome),
    Ops(Vec<MutationKind>),
}

struct AiContext {
    request_id: String,
    session: SessionId,
    user: UserId,
    kind: &'static str,
    base: Revision,
}

enum Command {
    Join {
        user: UserId,
        outbox: mpsc::UnboundedSender<ServerMessage>,
        reply: Reply<SessionId>,
    },
    Client {
        session: SessionId,
        msg: ClientMessage,
    },
    Leave {
        session: SessionId,
    },
    Tick {
        reply: Reply<()>,
    },
    WaitIdle {
        reply: Reply<()>,
    },
    State {
        reply: Reply<WorkspaceState>,
    },
    Info {
        reply: Reply<WorkspaceInfo>,
    },
    HintAttempts {
        reply: Reply<Vec<u64>>,
    },
    SaveSnapshot {
        name: String,
        overwrite: bool,
        reply: Reply<Result<SnapshotMeta, ServerError>>,
    },
    LoadSnapshot {
        name: String,
        reply: Reply<Result<Revision, ServerError>>,
    },
    Shutdown,
    AiDone {
        ctx: AiContext,
        result: Result<Completed, AiError>,
    },
    HintsDone {
        base: Revision,
        result: Result<Vec<RelationHint>, AiError>,
    },
    ChunkDone {
        session: SessionId,
        recording: RecordingId,
        slot: ChunkSlot,
        result: Result<String, AiError>,
    },
}

/// Cheap, cloneable access to a running workspace actor.
#[derive(Debug, Clone)]
pub struct WorkspaceHandle {
    id: WorkspaceId,
    tx: mpsc::UnboundedSender<Command>,
}

impl std::fmt::Debug for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Command")
    }
}

impl WorkspaceHandle {
    pub fn id(&self) -> &WorkspaceId {
        &self.id
    }

    async fn ask<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, ServerError> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(make(reply)).map_err(|_| ServerError::ActorGone)?;
        rx.await.map_err(|_| ServerError::ActorGone)
    }

    /// Opens a session. Messages for it arrive on the returned receiver,
    /// starting with its `joinSnapshot`.
    pub async fn join(
        &self,
        user: UserId,
    ) -> Result<(SessionId, mpsc::UnboundedReceiver<ServerMessage>), ServerError> {
        let (outbox, inbox) = mpsc::unbounded_channel();
        let session = self.ask(|reply| Command::Join { user, outbox, reply }).await?;
        Ok((session, inbox))
    }

    pub fn send(&self, session: &SessionId, msg: ClientMessage) -> Result<(), ServerError> {
        self.tx
            .send(Command::Client { session: session.clone(), msg })
            .map_err(|_| ServerError::ActorGone)
    }

    pub fn leave(&self, session: &SessionId) {
        let _ = self.tx.send(Command::Leave { session: session.clone() });
    }

    /// Lets the actor observe the current time (hint schedule, heartbeat
    /// expiry). Returns once that has been processed.
    pub async fn tick(&self) -> Result<(), ServerError> {
        self.ask(|reply| Command::Tick { reply }).await
    }

    /// Resolves once no provider call of this workspace is in flight.
    pub async fn wait_idle(&self) -> Result<(), ServerError> {
        self.ask(|reply| Command::WaitIdle { reply }).await
    }

    pub async fn state(&self) -> Result<WorkspaceState, ServerError> {
        self.ask(|reply| Command::State { reply }).await
    }

    pub async fn info(&self) -> Result<WorkspaceInfo, ServerError> {
        self.ask(|reply| Command::Info { reply }).await
    }

    /// Times of every due relation-hint tick so far.
    pub async fn hint_attempts(&self) -> Result<Vec<u64>, ServerError> {
        self.ask(|reply| Command::HintAttempts { reply }).await
    }

    pub async fn save_snapshot(&self, name: &str, overwrite: bool) -> Result<SnapshotMeta, ServerError> {
        let name = name.to_string();
        self.ask(|reply| Command::SaveSnapshot { name, overwrite, reply }).await?
    }

    pub async fn load_snapshot(&self, name: &str) -> Result<Revision, ServerError> {
        let name = name.to_string();
        self.ask(|reply| Command::LoadSnapshot { name, reply }).await?
    }

    pub fn shutdown(&self) {
        let _ = self.tx.send(Command::Shutdown);
    }
}

pub(crate) struct ActorParts {
    pub state: WorkspaceState,
    pub mint: IdMint,
    pub clock: Arc<dyn Clock>,
    pub gateway: ScopedGateway,
    pub store: Arc<dyn SnapshotStore>,
    pub options: ActorOptions,
}

pub(crate) fn spawn(parts: ActorParts) -> (WorkspaceHandle, tokio::task::JoinHandle<()>) {
    let (tx, rx) = mpsc::unbounded_channel();
    let id = parts.state.id.clone();
    let actor = Actor {
        seq: Sequencer::new(parts.state, parts.mint, parts.clock.clone()),
        clock: parts.clock,
        gw: parts.gateway,
        store: parts.store,
        options: parts.options,
        scheduler: HintScheduler::new(),
        recorder: Recorder::new(),
        outboxes: BTreeMap::new(),
        lens_candidates: Vec::new(),
        pending: 0,
        idle_waiters: Vec::new(),
        me: tx.downgrade(),
    };
    let task = tokio::spawn(actor.run(rx));
    (WorkspaceHandle { id, tx }, task)
}

/// Longest sleep between housekeeping passes in timer mode.
const MAX_NAP_MS: u64 = 1_000;

struct Actor {
    seq: Sequencer,
    clock: Arc<dyn Clock>,
    gw: ScopedGateway,
    store: Arc<dyn SnapshotStore>,
    options: ActorOptions,
    scheduler: HintScheduler,
    recorder: Recorder,
    outboxes: BTreeMap<SessionId, mpsc::UnboundedSender<ServerMessage>>,
    /// Latest `generateLenses` result, for install-by-name.
    lens_candidates: Vec<Refined>,
    /// Provider calls in flight.
    pending: usize,
    idle_waiters: Vec<Reply<()>>,
    me: mpsc::WeakUnboundedSender<Command>,
}

impl Actor {
    async fn run(mut self, mut rx: mpsc::UnboundedReceiver<Command>) {
        info!(workspace = %self.seq.state().id, "workspace started");
        loop {
            let nap = match self.options.ticking {
                Ticking::Timer => Some(self.nap()),
                Ticking::Manual => None,
            };
            let cmd = tokio::select! {
                cmd = rx.recv() => cmd,
                _ = async { tokio::time::sleep(nap.unwrap_or_default()).await }, if nap.is_some() => {
                    self.housekeeping();
                    continue;
                }
            };
            let Some(cmd) = cmd else { break };
            if matches!(cmd, Command::Shutdown) {
                break;
            }
            self.handle(cmd);
            if self.options.ticking == Ticking::Timer {
                self.housekeeping();
            } else {
                self.drive_hints();
            }
            if self.pending == 0 {
                for w in self.idle_waiters.drain(..) {
                    let _ = w.send(());
                }
            }
        }
        info!(workspace = %self.seq.state().id, "workspace stopped");
    }

    fn nap(&self) -> Duration {
        let now = self.clock.now_ms();
        let until_due = self
            .scheduler
            .next_due()
            .map_or(MAX_NAP_MS, |due| due.saturating_sub(now));
        Duration::from_millis(until_due.clamp(1, MAX_NAP_MS))
    }

    fn housekeeping(&mut self) {
        if self.options.expire_idle {
            for session in self.seq.expire_idle() {
                info!(%session, "session timed out");
                self.outboxes.remove(&session);
            }
        }
        self.drive_hints();
    }

    fn deliver(&mut self, out: Vec<Outgoing>) {
        let mut gone = Vec::new();
        for o in out {
            if let Some(tx) = self.outboxes.get(&o.to) {
                if tx.send(o.msg).is_err() {
                    gone.push(o.to);
                }
            }
        }
        for session in gone {
            self.drop_session(&session);
        }
    }

    fn send_to(&mut self, session: &SessionId, msg: ServerMessage) {
        self.deliver(vec![Outgoing { to: session.clone(), msg }]);
    }

    fn drop_session(&mut self, session: &SessionId) {
        self.outboxes.remove(session);
        self.seq.leave(session);
    }

    fn error_to(&mut self, session: &SessionId, code: &str, detail: String, request_id: Option<String>) {
        let out = self.seq.reply_error(session, code, detail, request_id);
        self.deliver(out);
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Join { user, outbox, reply } => {
                let (session, out) = self.seq.join(user.clone());
                info!(%session, %user, "session joined");
                self.outboxes.insert(session.clone(), outbox);
                self.deliver(out);
                let _ = reply.send(session);
            }
            Command::Client { session, msg } => self.on_client(session, msg),
            Command::Leave { session } => {
                debug!(%session, "session left");
                self.drop_session(&session);
            }
            Command::Tick { reply } => {
                self.housekeeping();
                let _ = reply.send(());
            }
            Command::WaitIdle { reply } => self.idle_waiters.push(reply),
            Command::State { reply } => {
                let _ = reply.send(self.seq.state().clone());
            }
            Command::Info { reply } => {
                let _ = reply.send(WorkspaceInfo {
                    id: self.seq.state().id.clone(),
                    revision: self.seq.revision(),
                    sessions: self.seq.sessions().len(),
                });
            }
            Command::HintAttempts { reply } => {
                let _ = reply.send(self.scheduler.attempts().to_vec());
            }
            Command::SaveSnapshot { name, overwrite, reply } => {
                let _ = reply.send(self.save_snapshot(&name, overwrite));
            }
            Command::LoadSnapshot { name, reply } => {
                let _ = reply.send(self.load_snapshot(&system_actor(), &name));
            }
            Command::Shutdown => {}
            Command::AiDone { ctx, result } => {
                self.pending -= 1;
                self.on_ai_done(ctx, result);
            }
            Command::HintsDone { base, result } => {
                self.pending -= 1;
                self.on_hints_done(base, result);
            }
            Command::ChunkDone { session, recording, slot, result } => {
                self.pending -= 1;
                self.on_chunk_done(session, recording, slot, result);
            }
        }
    }

    fn on_client(&mut self, session: SessionId, msg: ClientMessage) {
        if !self.outboxes.contains_key(&session) {
            return;
        }
        self.seq.touch(&session);
        match msg {
            ClientMessage::Join { .. } => {
                self.error_to(&session, "AlreadyJoined", "this connection already joined".into(), None)
            }
            ClientMessage::SubmitMutation { client_seq, mutation } => {
                let out = self.seq.submit(&session, client_seq, mutation);
                self.deliver(out);
            }
            ClientMessage::AiRequest { request_id, request } => self.on_ai(session, request_id, request),
            ClientMessage::StartRecording => self.start_recording(&session),
            ClientMessage::StopRecording => self.stop_recording(&session),
            ClientMessage::AudioChunk { data } => self.on_audio(&session, &data),
            ClientMessage::Ping { nonce } => self.send_to(&session, ServerMessage::Pong { nonce }),
        }
    }

    fn user_of(&self, session: &SessionId) -> UserId {
        self.seq.session_user(session).cloned().unwrap_or_else(system_actor)
    }

    // ---- AI requests ----

    fn on_ai(&mut self, session: SessionId, request_id: String, request: AiRequest) {
        let ctx = AiContext {
            request_id,
            user: self.user_of(&session),
            session,
            kind: request.kind(),
            base: self.seq.revision(),
        };
        let state = self.seq.state();
        let inline: Result<Completed, AiError> = match request {
            AiRequest::ExpandSubtask { mut card } => match ideation::expand_subtask(state, &mut card) {
                Ok(op) => {
                    let result = self.apply_ops(&ctx, vec![op]);
                    if let Ok(revisions) = result {
                        let outcome = AiOutcome::SubtaskExpanded { card, revisions };
                        let out = self.seq.broadcast_ai_result(&ctx.request_id, ctx.kind, &ctx.user, ctx.base, outcome);
                        self.deliver(out);
                    }
                    return;
                }
                Err(e) => Err(e),
            },
            AiRequest::AddHintAsNote { hint, source } => {
                Ok(Completed::Ops(vec![ideation::add_hint_as_note(state, &hint, source.as_ref())]))
            }
            AiRequest::ToggleHints { enabled, cross_user_only } => {
                Ok(Completed::Ops(vec![relations::toggle_hints(state, enabled, cross_user_only)]))
            }
            AiRequest::CardToNote { card } => Ok(Completed::Ops(vec![speech::card_to_note(state, &card)])),
            AiRequest::DeleteLens { lens } => Ok(Completed::Ops(vec![MutationKind::DeleteLens { lens }])),
            AiRequest::SaveSnapshot { name, overwrite } => {
                let result = self
                    .save_snapshot(&name, overwrite)
                    .map(|snapshot| AiOutcome::SnapshotSaved { snapshot });
                return self.finish_outcome(ctx, result);
            }
            AiRequest::ListSnapshots => {
                let result = self
                    .store
                    .list(&self.seq.state().id)
                    .map(|snapshots| AiOutcome::Snapshots { snapshots })
                    .map_err(ServerError::from);
                return self.finish_outcome(ctx, result);
            }
            AiRequest::LoadSnapshot { name } => {
                let user = ctx.user.clone();
                let result = self
                    .load_snapshot(&user, &name)
                    .map(|rev| AiOutcome::Applied { revisions: vec![rev] });
                return self.finish_outcome(ctx, result);
            }
            AiRequest::InstallLens { candidate, name } => {
                let candidate = candidate.or_else(|| {
                    let name = name.as_deref()?;
                    self.lens_candidates
                        .iter()
                        .find(|r| r.candidate.name == name)
                        .map(|r| r.candidate.clone())
                });
                match candidate {
                    Some(candidate) => {
                        let lens_id = self.seq.mint().lens();
                        self.spawn_ai(ctx, request_job(AiRequest::InstallLens { candidate: None, name: None }, Some((lens_id, candidate)), None));
                        return;
                    }
                    None => Err(AiError::unknown("lens candidate", name.unwrap_or_default())),
                }
            }
            AiRequest::ExtractKeyInfo | AiRequest::RetrieveRelevant => match self.recorder.transcript() {
                Some(t) => {
                    let t = t.clone();
                    self.spawn_ai(ctx, request_job(request, None, Some(t)));
                    return;
                }
                None => Err(AiError::EmptyTranscript),
            },
            request => {
                self.spawn_ai(ctx, request_job(request, None, None));
                return;
            }
        };
        self.on_ai_done(ctx, inline);
    }

    fn finish_outcome(&mut self, ctx: AiContext, result: Result<AiOutcome, ServerError>) {
        match result {
            Ok(outcome) => {
                let out = self.seq.broadcast_ai_result(&ctx.request_id, ctx.kind, &ctx.user, ctx.base, outcome);
                self.deliver(out);
            }
            Err(e) => self.error_to(&ctx.session, e.code(), e.to_string(), Some(ctx.request_id)),
        }
    }

    fn spawn_ai(&mut self, ctx: AiContext, job: Job) {
        let Some(tx) = self.me.upgrade() else { return };
        let gw = self.gw.clone();
        let state = self.seq.state().clone();
        self.pending += 1;
        tokio::spawn(async move {
            let result = run_job(&gw, &state, job).await;
            let _ = tx.send(Command::AiDone { ctx, result });
        });
    }

    fn apply_ops(&mut self, ctx: &AiContext, ops: Vec<MutationKind>) -> Result<Vec<Revision>, ()> {
        match self.seq.apply_batch(&ctx.user, ops) {
            Ok((revisions, out)) => {
                self.deliver(out);
                Ok(revisions)
            }
            Err(e) => {
                let detail = format!("result no longer applies: {e}");
                self.error_to(&ctx.session, e.code(), detail, Some(ctx.request_id.clone()));
                Err(())
            }
        }
    }

    fn on_ai_done(&mut self, ctx: AiContext, result: Result<Completed, AiError>) {
        let outcome = match result {
            Ok(Completed::Outcome(outcome)) => outcome,
            Ok(Completed::Ops(ops)) => match self.apply_ops(&ctx, ops) {
                Ok(revisions) => AiOutcome::Applied { revisions },
                Err(()) => return,
            },
            Err(e) => {
                warn!(kind = ctx.kind, code = e.code(), "ai request failed: {e}");
                self.error_to(&ctx.session, e.code(), e.to_string(), Some(ctx.request_id));
                return;
            }
        };
        if let AiOutcome::Lenses { candidates } = &outcome {
            self.lens_candidates = candidates.clone();
        }
        let out = self.seq.broadcast_ai_result(&ctx.request_id, ctx.kind, &ctx.user, ctx.base, outcome);
        self.deliver(out);
    }

    // ---- relation hints ----

    fn drive_hints(&mut self) {
        let now = self.clock.now_ms();
        let TickDecision::Generate(base) = self.scheduler.poll(now, self.seq.state()) else {
            return;
        };
        let Some(tx) = self.me.upgrade() else {
            self.scheduler.failed();
            return;
        };
        let gw = self.gw.clone();
        let state = self.seq.state().clone();
        self.pending += 1;
        tokio::spawn(async move {
            let result = relations::generate_hints(&gw, &state).await;
            let _ = tx.send(Command::HintsDone { base, result });
        });
    }

    fn on_hints_done(&mut self, base: Revision, result: Result<Vec<RelationHint>, AiError>) {
        let state = self.seq.state();
        if !state.settings.relation_hints_enabled {
            self.scheduler.failed();
            return;
        }
        let hints = match result {
            Ok(hints) => hints,
            Err(AiError::TooFewNotes { .. }) => Vec::new(),
            Err(e) => {
                warn!(code = e.code(), "relation hint refresh failed: {e}");
                self.scheduler.failed();
                return;
            }
        };
        // Changes made while generating were not seen by the provider, so
        // only the base revision counts as covered in that case.
        let covered = |applied: Revision, before: Revision| if before == base { applied } else { base };
        let before = state.revision;
        if hints.is_empty() && state.relation_hints.is_empty() {
            self.scheduler.succeeded(covered(before, before));
            return;
        }
        match self.seq.apply_as(system_actor(), MutationKind::ReplaceRelationHints { hints }) {
            Ok((rev, _, out)) => {
                self.deliver(out);
                self.scheduler.succeeded(covered(rev, before));
            }
            Err(e) => {
                warn!("relation hints did not apply: {e}");
                self.scheduler.failed();
            }
        }
    }

    // ---- speech ----

    fn start_recording(&mut self, session: &SessionId) {
        let id = self.seq.mint().recording();
        let user = self.user_of(session);
        let result = Recorder::start_mutation(self.seq.state(), id.clone())
            .and_then(|op| self.seq.apply_as(user, op).map_err(AiError::from));
        match result {
            Ok((_, _, out)) => {
                // A previous recording still waiting on chunks is cut short.
                if let Some(transcript) = self.recorder.abort() {
                    self.announce_stopped(transcript);
                }
                let now = self.clock.now_ms();
                if let Err(e) = self.recorder.begin(id, now) {
                    warn!("recorder out of step: {e}");
                }
                self.deliver(out);
            }
            Err(e) => self.error_to(session, e.code(), e.to_string(), None),
        }
    }

    fn stop_recording(&mut self, session: &SessionId) {
        let user = self.user_of(session);
        let result = Recorder::stop_mutation(self.seq.state())
            .and_then(|op| self.seq.apply_as(user, op).map_err(AiError::from));
        match result {
            Ok((_, _, out)) => {
                self.deliver(out);
                self.finish_transcript(false);
            }
            Err(e) => self.error_to(session, e.code(), e.to_string(), None),
        }
    }

    /// Stops the recorder. `recordingStopped` goes out once chunks already
    /// in transcription have landed, or right away when `force` drops them.
    fn finish_transcript(&mut self, force: bool) {
        let done = if force {
            self.recorder.abort()
        } else {
            self.recorder.stop().ok().flatten()
        };
        if let Some(transcript) = done {
            self.announce_stopped(transcript);
        }
    }

    fn announce_stopped(&mut self, transcript: Transcript) {
        let out = self.seq.broadcast(ServerMessage::RecordingStopped { transcript });
        self.deliver(out);
    }

    fn on_audio(&mut self, session: &SessionId, data: &str) {
        let bytes = match base64::engine::general_purpose::STANDARD.decode(data.trim()) {
            Ok(b) => b,
            Err(e) => return self.error_to(session, "MalformedMessage", format!("audio is not base64: {e}"), None),
        };
        let now = self.clock.now_ms();
        let (slot, recording) = match self.recorder.begin_chunk(now) {
            Ok(slot) => (slot, self.recorder.active().cloned().expect("recording is active")),
            Err(e) => return self.error_to(session, e.code(), e.to_string(), None),
        };
        if bytes.is_empty() {
            return self.on_chunk_done(session.clone(), recording, slot, Ok(String::new()));
        }
        let Some(tx) = self.me.upgrade() else { return };
        let gw = self.gw.clone();
        let session = session.clone();
        self.pending += 1;
        tokio::spawn(async move {
            let result = gw.transcribe(&bytes).await.map_err(AiError::from);
            let _ = tx.send(Command::ChunkDone { session, recording, slot, result });
        });
    }

    fn on_chunk_done(&mut self, session: SessionId, recording: RecordingId, slot: ChunkSlot, result: Result<String, AiError>) {
        if self.recorder.accepting_results() != Some(&recording) {
            debug!("late chunk for a finished recording dropped");
            return;
        }
        let text = match result {
            Ok(text) => Some(text),
            Err(e) => {
                self.error_to(&session, e.code(), e.to_string(), None);
                None
            }
        };
        let segments = self.recorder.finish_chunk(slot, text);
        for segment in segments {
            let out = self.seq.broadcast(ServerMessage::TranscriptSegment {
                recording: recording.clone(),
                segment,
            });
            self.deliver(out);
        }
        if let Some(transcript) = self.recorder.take_finished() {
            self.announce_stopped(transcript);
        }
    }

    // ---- snapshots ----

    fn save_snapshot(&mut self, name: &str, overwrite: bool) -> Result<SnapshotMeta, ServerError> {
        let now = self.clock.now_ms();
        Ok(self.store.save(self.seq.state(), name, overwrite, now)?)
    }

    /// Rolls the workspace back to a snapshot. An active recording is
    /// stopped first; every session then receives a fresh `joinSnapshot`.
    fn load_snapshot(&mut self, actor: &UserId, name: &str) -> Result<Revision, ServerError> {
        let state = self.store.load(&self.seq.state().id, name)?;
        self.finish_transcript(true);
        let (revision, out) = self.seq.restore(actor.clone(), state).map_err(|e| ServerError::Restore(e.to_string()))?;
        self.deliver(out);
        info!(snapshot = name, revision, "snapshot restored");
        Ok(revision)
    }
}

/// A provider-backed request with whatever it needs beyond the state.
struct Job {
    request: AiRequest,
    lens: Option<(LensId, LensCandidate)>,
    transcript: Option<Transcript>,
}

fn request_job(request: AiRequest, lens: Option<(LensId, LensCandidate)>, transcript: Option<Transcript>) -> Job {
    Job { request, lens, transcript }
}

async fn run_job(gw: &ScopedGateway, state: &WorkspaceState, job: Job) -> Result<Completed, AiError> {
    let hints = |hints| Completed::Outcome(AiOutcome::IdeaHints { hints });
    let transcript = || job.transcript.clone().ok_or(AiError::EmptyTranscript);
    Ok(match job.request {
        AiRequest::DecomposeGoal { goal } => Completed::Outcome(AiOutcome::Subtasks {
            cards: ideation::decompose_goal(gw, &goal).await?,
        }),
        AiRequest::ExpandQuery { note, query } => hints(ideation::expand_by_query(gw, state, &note, &query).await?),
        AiRequest::ExpandRelation { note, relation } => {
            hints(ideation::expand_by_relation(gw, state, &note, &relation).await?)
        }
        AiRequest::ApplySuggestion { note, hint } => {
            Completed::Ops(vec![ideation::apply_suggestion(gw, state, &note, &hint).await?])
        }
        AiRequest::GroupHints { group, instruction } => {
            hints(ideation::group_discussion_hints(gw, state, &group, instruction.as_deref()).await?)
        }
        AiRequest::GenerateLenses { scope } => Completed::Outcome(AiOutcome::Lenses {
            candidates: affinity::generate_lenses(gw, state, &scope).await?,
        }),
        AiRequest::InstallLens { .. } => {
            let (lens_id, candidate) = job.lens.expect("install jobs carry their candidate");
            Completed::Ops(vec![affinity::install_lens(gw, state, lens_id, candidate).await?])
        }
        AiRequest::Regroup { lens } => Completed::Ops(affinity::regroup(gw, state, &lens).await?.into_iter().collect()),
        AiRequest::SuggestDimensions { group } => Completed::Outcome(AiOutcome::Dimensions {
            dimensions: affinity::suggest_dimensions(gw, state, &group).await?,
        }),
        AiRequest::HierarchicalGroup { group, dimensions } => {
            Completed::Ops(affinity::hierarchical_group(gw, state, &group, &dimensions).await?)
        }
        AiRequest::ExtractKeyInfo => Completed::Outcome(AiOutcome::KeyInformation {
            cards: speech::extract_key_info(gw, state, &transcript()?).await?,
        }),
        AiRequest::RetrieveRelevant => Completed::Outcome(AiOutcome::RelevantIdeas {
            cards: speech::retrieve_relevant_ideas(gw, state, &transcript()?).await?,
        }),
        // Everything else is answered inline by the actor.
        other => unreachable!("{} is not a provider job", other.kind()),
    })
}
