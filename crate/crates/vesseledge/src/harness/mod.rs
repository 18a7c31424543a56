//! Scenario configuration, end-to-end batch replay, budget sweeps, and the
//! far-edge / near-edge live processes.

pub mod config;
pub mod live;
pub mod manifest;
pub mod replay;

pub use config::{
    apply_override, parse_config, Algorithm, ConfigError, InputFormat, ScenarioConfig,
};
pub use live::{run_far_edge, run_near_edge, serve_near_edge, FarEdgeReport, NearEdgeReport};
pub use manifest::{FileStamp, RunManifest};
pub use replay::{run_replay, sweep, ReplayOutput};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("pipeline error at stage {stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

impl HarnessError {
    /// CLI exit code: 2 config, 3 input, 4 pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Input(_) => 3,
            HarnessError::Stage { .. } => 4,
        }
    }
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e.to_string())
    }
}
