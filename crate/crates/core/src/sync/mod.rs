//! Real-time synchronization: wire protocol, the server-side sequencer,
//! client replicas and transports.

pub mod protocol;
pub mod replica;
pub mod sequencer;
pub mod sim;
pub mod transport;

pub use protocol::{decode, encode, AiOutcome, AiRequest, ClientMessage, ProtocolError, ServerMessage, PROTO_VERSION};
pub use replica::{ClientReplica, ReplicaError};
pub use sequencer::{Outgoing, Sequencer, HEARTBEAT_TIMEOUT_MS};
