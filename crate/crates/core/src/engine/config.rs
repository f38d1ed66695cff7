use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::neural::PriorMode;
use crate::optim::CobylaConfig;
use crate::qsim::{DEFAULT_ROTATION_LAYERS, MAX_QUBITS};
use crate::selfies::DEFAULT_MAX_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// LSTM and QCBM both update every epoch while their budgets last;
    /// the run lasts max(epochs_lstm, epochs_qcbm) epochs.
    Interleaved,
    /// epochs_lstm LSTM-only epochs, then epochs_qcbm QCBM-only epochs.
    Pretrain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Local,
    ContainsNitrogen,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub n_qubits: usize,
    pub n_rotation_layers: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub prior_mode: PriorMode,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lstm_passes_per_epoch: usize,
    pub epochs_lstm: usize,
    pub epochs_qcbm: usize,
    pub schedule: Schedule,
    /// Pretrain schedule only: LSTM-only epochs use uniform random priors.
    pub pretrain_uniform_priors: bool,
    pub priors_per_epoch: usize,
    pub molecules_per_prior: usize,
    pub reward: RewardKind,
    /// From this epoch on the external scorer replaces `reward`.
    pub reward_switch_epoch: Option<usize>,
    pub external_scorer: Option<Vec<String>>,
    pub scorer_timeout_secs: f64,
    pub temperature: f64,
    pub max_len: usize,
    pub master_seed: u64,
    pub dataset: PathBuf,
    pub cobyla: CobylaConfig,
    /// Stop when mean reward moved less than 1e-3 over the last 5 epochs.
    pub early_stop_plateau: bool,
    /// Wall time is not reproducible; when false the seconds column is 0.
    pub record_wall_time: bool,
    /// Molecules generated after training in the qubit sweep.
    pub eval_samples: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            n_qubits: 16,
            n_rotation_layers: DEFAULT_ROTATION_LAYERS,
            embed_dim: 128,
            hidden_dim: 256,
            n_layers: 1,
            prior_mode: PriorMode::Concat,
            dropout: 0.2,
            learning_rate: 1e-3,
            batch_size: 32,
            lstm_passes_per_epoch: 1,
            epochs_lstm: 40,
            epochs_qcbm: 30,
            schedule: Schedule::Interleaved,
            pretrain_uniform_priors: false,
            priors_per_epoch: 64,
            molecules_per_prior: 4,
            reward: RewardKind::Local,
            reward_switch_epoch: None,
            external_scorer: None,
            scorer_timeout_secs: 300.0,
            temperature: 1.0,
            max_len: DEFAULT_MAX_LEN,
            master_seed: 0,
            dataset: PathBuf::from("data/toy_200.smi"),
            cobyla: CobylaConfig::default(),
            early_stop_plateau: false,
            record_wall_time: false,
            eval_samples: 1000,
        }
    }
}

impl TrainingConfig {
    pub fn total_epochs(&self) -> usize {
        match self.schedule {
            Schedule::Interleaved => self.epochs_lstm.max(self.epochs_qcbm),
            Schedule::Pretrain => self.epochs_lstm + self.epochs_qcbm,
        }
    }

    pub fn trains_lstm(&self, epoch: usize) -> bool {
        epoch < self.epochs_lstm
    }

    pub fn trains_qcbm(&self, epoch: usize) -> bool {
        match self.schedule {
            Schedule::Interleaved => epoch < self.epochs_qcbm,
            Schedule::Pretrain => epoch >= self.epochs_lstm,
        }
    }

    pub fn uses_external(&self, epoch: usize) -> bool {
        self.reward == RewardKind::External || self.reward_switch_epoch.is_some_and(|s| epoch >= s)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let positive = [
            ("n_qubits", self.n_qubits),
            ("n_rotation_layers", self.n_rotation_layers),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("batch_size", self.batch_size),
            ("lstm_passes_per_epoch", self.lstm_passes_per_epoch),
            ("priors_per_epoch", self.priors_per_epoch),
            ("molecules_per_prior", self.molecules_per_prior),
            ("max_len", self.max_len),
            ("cobyla.max_evals", self.cobyla.max_evals),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(EngineError::config(key, "must be at least 1"));
            }
        }
        if self.n_qubits > MAX_QUBITS {
            return Err(EngineError::config("n_qubits", format!("at most {MAX_QUBITS}")));
        }
        if !(1..=2).contains(&self.n_layers) {
            return Err(EngineError::config("n_layers", "must be 1 or 2"));
        }
        if self.total_epochs() == 0 {
            return Err(EngineError::config("epochs_lstm", "epochs_lstm and epochs_qcbm are both 0"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(EngineError::config("dropout", "must be in [0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EngineError::config("learning_rate", "must be positive"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(EngineError::config("temperature", "must be positive"));
        }
        if !(self.scorer_timeout_secs > 0.0 && self.scorer_timeout_secs.is_finite()) {
            return Err(EngineError::config("scorer_timeout_secs", "must be positive"));
        }
        if !(self.cobyla.rho_end > 0.0 && self.cobyla.rho_end < self.cobyla.rho_begin) {
            return Err(EngineError::config("cobyla.rho_end", "require 0 < rho_end < rho_begin"));
        }
        if self.dataset.as_os_str().is_empty() {
            return Err(EngineError::config("dataset", "path is empty"));
        }
        let needs_scorer = self.reward == RewardKind::External || self.reward_switch_epoch.is_some();
        if needs_scorer && self.external_scorer.as_ref().is_none_or(|c| c.is_empty()) {
            return Err(EngineError::config("external_scorer", "required by the reward settings"));
        }
        Ok(())
    }
}
