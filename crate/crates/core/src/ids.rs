//! Identifier namespaces and the server-side identifier mint.

use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use ulid::Ulid;

use crate::clock::Clock;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(raw: impl Into<String>) -> Self {
                Self(raw.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(
    /// Workspace name chosen by clients (e.g. from the `?ws=` query).
    WorkspaceId
);
string_id!(
    /// Declared per session; there is no authentication.
    UserId
);
string_id!(NoteId);
string_id!(GroupId);
string_id!(LensId);
string_id!(RecordingId);
string_id!(SessionId);
string_id!(SnapshotName);

/// Mints ULID-style tokens: 48 bits of clock time followed by 80 random
/// bits, strictly increasing even when several are minted in the same
/// millisecond. Seeded generators make replays reproducible.
#[derive(Debug)]
pub struct IdMint {
    clock: Arc<dyn Clock>,
    rng: ChaCha20Rng,
    last: Option<Ulid>,
}

impl IdMint {
    pub fn new(clock: Arc<dyn Clock>, seed: u64) -> Self {
        Self {
            clock,
            rng: ChaCha20Rng::seed_from_u64(seed),
            last: None,
        }
    }

    pub fn from_entropy(clock: Arc<dyn Clock>) -> Self {
        Self::new(clock, rand::random())
    }

    fn next_ulid(&mut self) -> Ulid {
        let now = self.clock.now_ms();
        let next = match self.last {
            Some(last) if last.timestamp_ms() >= now => last
                .increment()
                .unwrap_or_else(|| Ulid::from_parts(last.timestamp_ms() + 1, 0)),
            _ => {
                let mut bytes = [0u8; 16];
                self.rng.fill_bytes(&mut bytes);
                Ulid::from_parts(now, u128::from_le_bytes(bytes))
            }
        };
        self.last = Some(next);
        next
    }

    fn token(&mut self, prefix: &str) -> String {
        format!("{prefix}_{}", self.next_ulid().to_string().to_ascii_lowercase())
    }

    pub fn note(&mut self) -> NoteId {
        NoteId(self.token("n"))
    }

    pub fn group(&mut self) -> GroupId {
        GroupId(self.token("g"))
    }

    pub fn lens(&mut self) -> LensId {
        LensId(self.token("l"))
    }

    pub fn recording(&mut self) -> RecordingId {
        RecordingId(self.token("r"))
    }

    pub fn session(&mut self) -> SessionId {
        SessionId(self.token("s"))
    }
}
