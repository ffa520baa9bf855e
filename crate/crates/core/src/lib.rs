pub mod affinity;
pub mod clock;
pub mod error;
pub mod gateway;
pub mod ideation;
pub mod ids;
pub mod keyed;
pub mod relations;
pub mod server;
pub mod snapshot;
pub mod speech;
pub mod sync;
pub mod workspace;
