//! Shared-workspace domain model and its single mutation path.

pub mod canonical;
pub mod color;
pub mod model;
pub mod mutation;
pub mod relation;

pub use canonical::{
    canonicalize, content_json, from_canonical_json, from_canonical_value, to_canonical_json,
    to_canonical_value, CanonicalError,
};
pub use color::{color_for_user, Color};
pub use model::*;
pub use mutation::{apply_mutation, system_actor, Event, Mutation, MutationKind, WorkspaceError};
pub use relation::{RelationType, UnknownRelationType};
