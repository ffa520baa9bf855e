//! Wire messages. Every frame is one JSON object carrying `"proto": 1` and
//! a `"type"` discriminator; the same schema is used over WebSockets and the
//! in-process framed transport.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::affinity::Refined;
use crate::ideation::{IdeaHint, SubtaskCard};
use crate::ids::{GroupId, LensId, NoteId, RecordingId, SessionId, UserId, WorkspaceId};
use crate::snapshot::SnapshotMeta;
use crate::speech::{KeyInfoCard, RelevantIdeaCard, Segment, Transcript};
use crate::workspace::{Event, LensCandidate, LensScope, MutationKind, Revision, WorkspaceState};

pub const PROTO_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ClientMessage {
    /// Must be the first message of a connection.
    Join {
        workspace: WorkspaceId,
        user: UserId,
    },
    SubmitMutation {
        client_seq: u64,
        mutation: MutationKind,
    },
    AiRequest {
        request_id: String,
        request: AiRequest,
    },
    StartRecording,
    StopRecording,
    AudioChunk {
        /// Base64 audio bytes.
        data: String,
    },
    /// Liveness probe; answered with `pong` after everything already queued
    /// for this session.
    Ping {
        nonce: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum AiRequest {
    DecomposeGoal {
        goal: String,
    },
    ExpandSubtask {
        card: SubtaskCard,
    },
    ExpandQuery {
        note: NoteId,
        query: String,
    },
    ExpandRelation {
        note: NoteId,
        relation: String,
    },
    ApplySuggestion {
        note: NoteId,
        hint: String,
    },
    AddHintAsNote {
        hint: String,
        #[serde(default)]
        source: Option<NoteId>,
    },
    GroupHints {
        group: GroupId,
        #[serde(default)]
        instruction: Option<String>,
    },
    GenerateLenses {
        #[serde(default = "global_scope")]
        scope: LensScope,
    },
    /// Installs either the given candidate or, by name, one of the
    /// candidates from the workspace's latest `generateLenses` result.
    InstallLens {
        #[serde(default)]
        candidate: Option<LensCandidate>,
        #[serde(default)]
        name: Option<String>,
    },
    Regroup {
        lens: LensId,
    },
    DeleteLens {
        lens: LensId,
    },
    SuggestDimensions {
        group: GroupId,
    },
    HierarchicalGroup {
        group: GroupId,
        dimensions: Vec<String>,
    },
    ToggleHints {
        enabled: bool,
        #[serde(default)]
        cross_user_only: bool,
    },
    ExtractKeyInfo,
    RetrieveRelevant,
    CardToNote {
        card: KeyInfoCard,
    },
    SaveSnapshot {
        name: String,
        #[serde(default)]
        overwrite: bool,
    },
    LoadSnapshot {
        name: String,
    },
    ListSnapshots,
}

fn global_scope() -> LensScope {
    LensScope::Global
}

impl AiRequest {
    pub fn kind(&self) -> &'static str {
        match self {
            AiRequest::DecomposeGoal { .. } => "decomposeGoal",
            AiRequest::ExpandSubtask { .. } => "expandSubtask",
            AiRequest::ExpandQuery { .. } => "expandQuery",
            AiRequest::ExpandRelation { .. } => "expandRelation",
            AiRequest::ApplySuggestion { .. } => "applySuggestion",
            AiRequest::AddHintAsNote { .. } => "addHintAsNote",
            AiRequest::GroupHints { .. } => "groupHints",
            AiRequest::GenerateLenses { .. } => "generateLenses",
            AiRequest::InstallLens { .. } => "installLens",
            AiRequest::Regroup { .. } => "regroup",
            AiRequest::DeleteLens { .. } => "deleteLens",
            AiRequest::SuggestDimensions { .. } => "suggestDimensions",
            AiRequest::HierarchicalGroup { .. } => "hierarchicalGroup",
            AiRequest::ToggleHints { .. } => "toggleHints",
            AiRequest::ExtractKeyInfo => "extractKeyInfo",
            AiRequest::RetrieveRelevant => "retrieveRelevant",
            AiRequest::CardToNote { .. } => "cardToNote",
            AiRequest::SaveSnapshot { .. } => "saveSnapshot",
            AiRequest::LoadSnapshot { .. } => "loadSnapshot",
            AiRequest::ListSnapshots => "listSnapshots",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ServerMessage {
    JoinSnapshot {
        session: SessionId,
        user: UserId,
        color: String,
        revision: Revision,
        state: Value,
    },
    MutationApplied {
        revision: Revision,
        actor: UserId,
        mutation: MutationKind,
        events: Vec<Event>,
    },
    Ack {
        client_seq: u64,
        revision: Revision,
    },
    AiResult {
        request_id: String,
        kind: String,
        requested_by: UserId,
        base_revision: Revision,
        result: AiOutcome,
    },
    TranscriptSegment {
        recording: RecordingId,
        segment: Segment,
    },
    RecordingStopped {
        transcript: Transcript,
    },
    Error {
        code: String,
        detail: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_seq: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
    },
    Pong {
        nonce: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum AiOutcome {
    Subtasks { cards: Vec<SubtaskCard> },
    SubtaskExpanded { card: SubtaskCard, revisions: Vec<Revision> },
    IdeaHints { hints: Vec<IdeaHint> },
    /// The request's mutations were applied at these revisions (possibly
    /// none, e.g. a regroup with nothing to do).
    Applied { revisions: Vec<Revision> },
    Lenses { candidates: Vec<Refined> },
    Dimensions { dimensions: Vec<String> },
    KeyInformation { cards: Vec<KeyInfoCard> },
    RelevantIdeas { cards: Vec<RelevantIdeaCard> },
    SnapshotSaved { snapshot: SnapshotMeta },
    Snapshots { snapshots: Vec<SnapshotMeta> },
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("message is not a JSON object")]
    NotAnObject,
    #[error("frame is not UTF-8 text")]
    NotText,
    #[error("unsupported protocol version {0:?}")]
    Version(Option<u64>),
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Malformed(_) | ProtocolError::NotAnObject | ProtocolError::NotText => "MalformedMessage",
            ProtocolError::Version(_) => "UnsupportedProtocol",
        }
    }
}

/// Serializes a message with the protocol version stamped in.
pub fn encode<T: Serialize>(msg: &T) -> String {
    let mut value = serde_json::to_value(msg).expect("messages serialize");
    if let Value::Object(map) = &mut value {
        map.insert("proto".into(), Value::from(PROTO_VERSION));
    }
    value.to_string()
}

/// Parses a frame, rejecting other protocol versions.
pub fn decode<T: DeserializeOwned>(text: &str) -> Result<T, ProtocolError> {
    let mut value: Value = serde_json::from_str(text)?;
    let map = value.as_object_mut().ok_or(ProtocolError::NotAnObject)?;
    let proto = map.remove("proto").and_then(|v| v.as_u64());
    if proto != Some(PROTO_VERSION) {
        return Err(ProtocolError::Version(proto));
    }
    Ok(serde_json::from_value(value)?)
}

/// The state document as sent in `joinSnapshot`.
pub fn state_document(state: &WorkspaceState) -> Value {
    crate::workspace::to_canonical_value(state)
}
