use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EngineError, TrainingConfig};
use crate::neural::LstmCheckpoint;
use crate::optim::AdamState;
use crate::qsim::{BitString, QcbmCheckpoint};

pub const CHECKPOINT_SCHEMA: u32 = 1;

/// Every generator is derived from the master seed and the epoch, so the
/// pair is the whole random state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub master_seed: u64,
    pub next_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    /// Epochs completed.
    pub epoch: usize,
    pub config: TrainingConfig,
    pub qcbm: QcbmCheckpoint,
    pub lstm: LstmCheckpoint,
    pub adam: AdamState,
    /// Priors drawn for the next epoch.
    pub priors: Vec<BitString>,
    pub rng: RngState,
    pub reward_history: Vec<f64>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Checkpoint, EngineError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| EngineError::Checkpoint(format!("not JSON: {e}")))?;
        let found = value.get("schema_version").and_then(|v| v.as_u64());
        if found != Some(CHECKPOINT_SCHEMA as u64) {
            return Err(EngineError::Checkpoint(format!(
                "schema_version {} is not supported (expected {CHECKPOINT_SCHEMA})",
                found.map_or("missing".to_string(), |v| v.to_string())
            )));
        }
        serde_json::from_value(value).map_err(|e| EngineError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), EngineError> {
        fs::write(path, self.to_json()).map_err(|source| EngineError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Checkpoint, EngineError> {
        let text = fs::read_to_string(path).map_err(|source| EngineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Checkpoint::from_json(&text)
    }
}
