use std::path::PathBuf;

use clap::Parser;

use super::ServerError;
use crate::gateway::live::{LiveConfig, DEFAULT_ASR_MODEL, DEFAULT_ENDPOINT, DEFAULT_KEY_ENV, DEFAULT_MODEL};
use crate::gateway::{Gateway, MockProvider};

#[derive(Debug, Clone, Parser)]
#[command(name = "board-server", about = "Collaborative whiteboard server", version)]
pub struct ServerConfig {
    #[arg(long, env = "BOARD_PORT", default_value_t = 8787)]
    pub port: u16,

    #[arg(long, env = "BOARD_BIND", default_value = "127.0.0.1")]
    pub bind: String,

    /// Snapshot storage root.
    #[arg(long, env = "BOARD_DATA_DIR", default_value = "./data")]
    pub data_dir: PathBuf,

    /// Built board UI served under /app.
    #[arg(long, env = "BOARD_STATIC_DIR", default_value = "./board-ui/dist")]
    pub static_dir: PathBuf,

    /// Serve model calls from the fixture files in this directory instead
    /// of a live provider.
    #[arg(long, env = "BOARD_MOCK_FIXTURES")]
    pub mock_fixtures: Option<PathBuf>,

    /// Default relation-hint refresh interval for new workspaces.
    #[arg(long, default_value_t = 10_000)]
    pub hint_interval_ms: u64,

    /// Run a recorded session script against the mock provider and exit.
    #[arg(long, requires = "mock_fixtures")]
    pub replay: Option<PathBuf>,

    /// Print the final state of a replay instead of only checking it.
    #[arg(long, requires = "replay")]
    pub print_state: bool,

    /// Refuse joins to workspaces that were not created via the admin API.
    #[arg(long)]
    pub no_auto_create: bool,

    /// Seed for identifier minting (random when absent).
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, env = "BOARD_LLM_ENDPOINT", default_value = DEFAULT_ENDPOINT)]
    pub llm_endpoint: String,

    #[arg(long, env = "BOARD_LLM_MODEL", default_value = DEFAULT_MODEL)]
    pub llm_model: String,

    #[arg(long, env = "BOARD_ASR_MODEL", default_value = DEFAULT_ASR_MODEL)]
    pub asr_model: String,

    /// Name of the environment variable holding the provider API key.
    #[arg(long, default_value = DEFAULT_KEY_ENV)]
    pub llm_key_env: String,

    #[arg(long, env = "BOARD_LOG", default_value = "info")]
    pub log_level: String,
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), ServerError> {
        if self.hint_interval_ms == 0 {
            return Err(ServerError::BadConfig("--hint-interval-ms must be positive".into()));
        }
        if let Some(dir) = &self.mock_fixtures {
            if !dir.is_dir() {
                return Err(ServerError::BadConfig(format!(
                    "fixture directory {} does not exist",
                    dir.display()
                )));
            }
        }
        Ok(())
    }

    /// The mock provider when fixtures are configured, otherwise the live
    /// one (which needs its API key in the environment).
    pub fn gateway(&self) -> Result<Gateway, ServerError> {
        match &self.mock_fixtures {
            Some(dir) => Ok(Gateway::mock(
                MockProvider::from_dir(dir).map_err(|e| ServerError::BadConfig(e.to_string()))?,
            )),
            None => {
                let live = LiveConfig::from_env(&self.llm_endpoint, &self.llm_model, &self.asr_model, &self.llm_key_env)
                    .map_err(|e| ServerError::BadConfig(e.to_string()))?;
                Gateway::live(live).map_err(|e| ServerError::BadConfig(e.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ServerConfig::parse_from(["board-server"]);
        assert_eq!(c.port, 8787);
        assert_eq!(c.hint_interval_ms, 10_000);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn zero_interval_is_rejected() {
        let c = ServerConfig::parse_from(["board-server", "--hint-interval-ms", "0"]);
        assert!(matches!(c.validate(), Err(ServerError::BadConfig(_))));
    }

    #[test]
    fn replay_requires_fixtures() {
        assert!(ServerConfig::try_parse_from(["board-server", "--replay", "x.session"]).is_err());
    }
}
