//! The server shell: workspace actors, the connection hub, HTTP and
//! WebSocket endpoints, and the session-script runner.

mod actor;
pub mod config;
pub mod http;
pub mod hub;
pub mod replay;

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use tokio::net::TcpListener;
use tracing::info;

pub use actor::{Ticking, WorkspaceHandle, WorkspaceInfo};
pub use config::ServerConfig;
pub use hub::{Hub, HubOptions};
pub use replay::{run_script, ReplayReport, ReplayScript, Step};

use crate::clock::SystemClock;
use crate::snapshot::{FileSnapshotStore, MemorySnapshotStore, SnapshotError};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown workspace {0}")]
    UnknownWorkspace(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("snapshot could not be restored: {0}")]
    Restore(String),
    #[error("workspace is shutting down")]
    ActorGone,
    #[error("replay: {0}")]
    Replay(String),
}

impl ServerError {
    pub fn code(&self) -> &'static str {
        match self {
            ServerError::BadConfig(_) => "BadConfig",
            ServerError::PortInUse(_) => "PortInUse",
            ServerError::Io(_) => "Io",
            ServerError::UnknownWorkspace(_) => "UnknownWorkspace",
            ServerError::BadRequest(_) => "BadRequest",
            ServerError::Snapshot(e) => e.code(),
            ServerError::Restore(_) => "RestoreFailed",
            ServerError::ActorGone => "Unavailable",
            ServerError::Replay(_) => "ReplayFailed",
        }
    }
}

/// Binds the listener, mapping "address in use" to [`ServerError::PortInUse`].
pub async fn bind(host: &str, port: u16) -> Result<TcpListener, ServerError> {
    TcpListener::bind((host, port)).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServerError::PortInUse(port),
        _ => ServerError::Io(e),
    })
}

/// Serves until `shutdown` resolves. Workspaces are stopped first, which
/// closes every client connection, so the HTTP server can drain.
pub async fn serve(
    hub: Hub,
    listener: TcpListener,
    static_dir: PathBuf,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    let stopping = hub.clone();
    axum::serve(listener, http::router(hub, static_dir))
        .with_graceful_shutdown(async move {
            shutdown.await;
            info!("shutting down");
            stopping.shutdown().await;
        })
        .await?;
    Ok(())
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

/// Entry point of the `board-server` binary.
pub async fn run(config: ServerConfig) -> Result<(), ServerError> {
    config.validate()?;
    let gateway = config.gateway()?;
    if let Some(path) = &config.replay {
        let (script, dir) = ReplayScript::load(path)?;
        let report = run_script(&script, &dir, gateway, Arc::new(MemorySnapshotStore::new())).await?;
        if config.print_state {
            println!("{}", report.final_state);
        }
        for f in &report.failures {
            eprintln!("FAIL {f}");
        }
        return match report.golden_match {
            Some(false) => Err(ServerError::Replay("final state differs from the golden file".into())),
            _ if !report.failures.is_empty() => Err(ServerError::Replay(format!("{} expectation(s) failed", report.failures.len()))),
            _ => {
                eprintln!("replay ok: revision {}", report.revision);
                Ok(())
            }
        };
    }
    let hub = Hub::new(
        gateway,
        Arc::new(FileSnapshotStore::new(&config.data_dir)),
        Arc::new(SystemClock),
        HubOptions {
            auto_create: !config.no_auto_create,
            ticking: Ticking::Timer,
            expire_idle: true,
            seed: config.seed,
            hint_interval_ms: config.hint_interval_ms,
        },
    );
    let listener = bind(&config.bind, config.port).await?;
    info!(addr = %listener.local_addr()?, "listening");
    serve(hub, listener, config.static_dir.clone(), shutdown_signal()).await
}
