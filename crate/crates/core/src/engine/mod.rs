//! The hybrid loop: LSTM training with QCBM priors, generation, rewards,
//! softmax targets and COBYLA updates of the circuit, plus metrics, the
//! qubit-count sweep and checkpoints.

mod checkpoint;
mod config;
mod generate;
mod metrics;
mod report;
mod scaling;
mod train;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_SCHEMA};
pub use config::{RewardKind, Schedule, TrainingConfig};
pub use generate::{generate, generate_from_priors, Generated};
pub use metrics::{metrics, metrics_seeded, MetricsReport, MAX_DIVERSITY_PAIRS};
pub use report::{write_epoch_csv, EpochReport, EPOCH_CSV_HEADER};
pub use scaling::{qubit_scaling_experiment, write_scaling_csv, ScalingRow, SCALING_CSV_HEADER};
pub use train::{hybrid_train, hybrid_train_on, qcbm_train_step, QcbmStep, Trainer, MIN_DATASET};

use crate::molgraph::DatasetError;
use crate::neural::NeuralError;
use crate::optim::OptimError;
use crate::qsim::QsimError;
use crate::reward::RewardError;
use crate::selfies::{AlphabetError, SelfiesError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("dataset has {found} usable molecules, at least {required} are needed")]
    DatasetTooSmall { found: usize, required: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Selfies(#[from] SelfiesError),
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty batch")]
    EmptyBatch,
}

impl EngineError {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> EngineError {
        EngineError::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

/// Independent random streams, one per use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    QcbmInit = 1,
    PriorSample = 2,
    LstmInit = 3,
    LstmShuffle = 4,
    LstmPriors = 5,
    Dropout = 6,
    Generation = 7,
    Metrics = 8,
    Augment = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the generator identified by (master, purpose, epoch, index).
pub fn seed_for(master: u64, purpose: Purpose, epoch: u64, index: u64) -> u64 {
    [purpose as u64, epoch, index]
        .iter()
        .fold(splitmix64(master), |h, &v| splitmix64(h ^ splitmix64(v)))
}

pub fn rng_for(master: u64, purpose: Purpose, epoch: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed_for(master, purpose, epoch, index))
}
