use std::fmt;

use qdgen::engine::EngineError;
use qdgen::molgraph::DatasetError;
use qdgen::reward::RewardError;

pub const OK: u8 = 0;
pub const INTERNAL: u8 = 1;
pub const PARSE: u8 = 2;
pub const CONFIG: u8 = 3;
pub const SCORER: u8 = 4;
pub const CHECKPOINT: u8 = 5;

/// An error plus the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn config(key: &str, reason: impl fmt::Display) -> Failure {
        Failure::new(CONFIG, format!("config key `{key}`: {reason}"))
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Failure {
        Failure::new(INTERNAL, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Failure {
        Failure::new(PARSE, e.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Failure {
        let code = match &e {
            EngineError::Dataset(_) => PARSE,
            EngineError::Config { .. } | EngineError::DatasetTooSmall { .. } => CONFIG,
            EngineError::Reward(r) => match r {
                RewardError::EmptyBatch => INTERNAL,
                _ => SCORER,
            },
            EngineError::Checkpoint(_) => CHECKPOINT,
            _ => INTERNAL,
        };
        Failure::new(code, e.to_string())
    }
}
