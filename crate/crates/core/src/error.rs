use crate::gateway::GatewayError;
use crate::workspace::{RelationType, UnknownRelationType, WorkspaceError};

/// Failures of the AI-assisted operations (ideation, affinity, relation
/// hints, speech). Codes double as wire error codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AiError {
    #[error("goal text is empty")]
    EmptyGoal,
    #[error("query text is empty")]
    EmptyQuery,
    #[error("unknown {kind} {id}")]
    UnknownReference { kind: &'static str, id: String },
    #[error("{0:?} is not one of the {n} relation types", n = RelationType::ALL.len())]
    UnknownRelationType(String),
    #[error("subtask {0:?} was already expanded")]
    AlreadyExpanded(String),
    #[error("needs at least {needed} notes, found {found}")]
    TooFewNotes { needed: usize, found: usize },
    #[error("no grouping dimensions given")]
    EmptyDimensions,
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error("no active recording")]
    NoActiveRecording,
    #[error("a recording is already active")]
    RecordingAlreadyActive,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
}

impl AiError {
    pub fn code(&self) -> &'static str {
        match self {
            AiError::EmptyGoal => "EmptyGoal",
            AiError::EmptyQuery => "EmptyQuery",
            AiError::UnknownReference { .. } => "UnknownReference",
            AiError::UnknownRelationType(_) => "UnknownRelationType",
            AiError::AlreadyExpanded(_) => "AlreadyExpanded",
            AiError::TooFewNotes { .. } => "TooFewNotes",
            AiError::EmptyDimensions => "EmptyDimensions",
            AiError::EmptyTranscript => "EmptyTranscript",
            AiError::NoActiveRecording => "NoActiveRecording",
            AiError::RecordingAlreadyActive => "RecordingAlreadyActive",
            AiError::Gateway(e) => e.code(),
            AiError::Workspace(e) => e.code(),
        }
    }

    pub fn unknown(kind: &'static str, id: impl ToString) -> Self {
        AiError::UnknownReference {
            kind,
            id: id.to_string(),
        }
    }
}

impl From<UnknownRelationType> for AiError {
    fn from(e: UnknownRelationType) -> Self {
        AiError::UnknownRelationType(e.0)
    }
}
