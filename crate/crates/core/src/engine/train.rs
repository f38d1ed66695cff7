use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::Rng;

use super::generate::{gen_config, generate_from_priors};
use super::{
    metrics, rng_for, seed_for, Checkpoint, EngineError, EpochReport, Purpose, RewardKind, RngState, TrainingConfig,
    CHECKPOINT_SCHEMA,
};
use crate::molgraph::{read_dataset, MolecularGraph};
use crate::neural::{Example, LstmCheckpoint, LstmDims, LstmModel, NeuralError};
use crate::optim::{cobyla_minimize, AdamState, CobylaConfig, OptimError};
use crate::qsim::{
    born_distribution, build_state, exact_nll_sparse, sample, BitString, QcbmAnsatz, QcbmCheckpoint, QsimError,
};
use crate::reward::{
    build_target, local_filter, ExternalScorer, LocalReward, NitrogenReward, NoveltyCache, RewardModel,
    TargetDistribution,
};
use crate::selfies::{encode, Alphabet, END_ID, PAD_ID, START_ID};

pub const MIN_DATASET: usize = 100;
const PLATEAU_WINDOW: usize = 5;
const PLATEAU_DELTA: f64 = 1e-3;
const BORN_REPORT_MAX_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct QcbmStep {
    pub theta: Vec<f64>,
    pub nll_before: f64,
    pub nll_after: f64,
    pub evals: usize,
}

fn circuit_nll(ansatz: &QcbmAnsatz, theta: &[f64], target: &TargetDistribution) -> Result<f64, QsimError> {
    let dist = born_distribution(&build_state(ansatz, theta)?);
    exact_nll_sparse(&dist, target.entries())
}

/// COBYLA on the exact NLL of the target. An exhausted budget is not an
/// error: the best point found is used, which is never worse than `theta`.
pub fn qcbm_train_step(
    ansatz: &QcbmAnsatz,
    theta: &[f64],
    target: &TargetDistribution,
    cobyla: &CobylaConfig,
) -> Result<QcbmStep, EngineError> {
    let nll_before = circuit_nll(ansatz, theta, target)?;
    let objective = |t: &[f64]| circuit_nll(ansatz, t, target).unwrap_or(f64::INFINITY);
    let best = match cobyla_minimize(objective, theta, cobyla) {
        Ok(r) => r,
        Err(OptimError::MaxEvalsExceeded { best }) => {
            debug!("cobyla budget of {} evaluations used", best.n_evals);
            best
        }
        Err(e) => return Err(e.into()),
    };
    let (theta, nll_after) = if best.f_best <= nll_before {
        (best.x_best, best.f_best)
    } else {
        (theta.to_vec(), nll_before)
    };
    Ok(QcbmStep {
        theta,
        nll_before,
        nll_after,
        evals: best.n_evals,
    })
}

pub struct Trainer {
    config: TrainingConfig,
    tokens: Vec<Vec<usize>>,
    alphabet: Alphabet,
    ansatz: QcbmAnsatz,
    theta: Vec<f64>,
    model: LstmModel,
    adam: AdamState,
    priors: Vec<BitString>,
    epoch: usize,
    reward_history: Vec<f64>,
    local: LocalReward,
}

fn encode_dataset(dataset: &[MolecularGraph]) -> Vec<(usize, Vec<crate::selfies::SelfiesToken>)> {
    let mut out = Vec::with_capacity(dataset.len());
    for (i, g) in dataset.iter().enumerate() {
        match encode(g) {
            Ok(t) if !t.is_empty() => out.push((i, t)),
            Ok(_) => warn!("dataset molecule {} encodes to nothing; skipped", i + 1),
            Err(e) => warn!("dataset molecule {} skipped: {e}", i + 1),
        }
    }
    out
}

impl Trainer {
    pub fn new(config: TrainingConfig, dataset: &[MolecularGraph]) -> Result<Trainer, EngineError> {
        config.validate()?;
        let encoded = encode_dataset(dataset);
        if encoded.len() < MIN_DATASET {
            return Err(EngineError::DatasetTooSmall {
                found: encoded.len(),
                required: MIN_DATASET,
            });
        }
        let alphabet = Alphabet::new(encoded.iter().flat_map(|(_, t)| t.iter()));
        let tokens = encoded
            .iter()
            .map(|(_, t)| alphabet.encode_ids(t))
            .collect::<Result<Vec<_>, _>>()?;
        let master = config.master_seed;
        let ansatz = QcbmAnsatz::new(config.n_qubits, config.n_rotation_layers)?;
        let theta = ansatz.random_theta(&mut rng_for(master, Purpose::QcbmInit, 0, 0));
        let dims = LstmDims {
            vocab_size: alphabet.len(),
            embed_dim: config.embed_dim,
            hidden_dim: config.hidden_dim,
            n_layers: config.n_layers,
            n_qubits: config.n_qubits,
            mode: config.prior_mode,
        };
        let model = LstmModel::new(dims, &mut rng_for(master, Purpose::LstmInit, 0, 0))?;
        let adam = AdamState::new(model.params().len(), config.learning_rate);
        let dist = born_distribution(&build_state(&ansatz, &theta)?);
        // First epoch: no rewards yet, priors come from the untrained circuit.
        let priors = sample(&dist, config.priors_per_epoch, &mut rng_for(master, Purpose::PriorSample, 0, 0));
        let used: Vec<&MolecularGraph> = encoded.iter().map(|(i, _)| &dataset[*i]).collect();
        let local = LocalReward::new(NoveltyCache::new(used));
        info!(
            "dataset: {} molecules ({} skipped), vocabulary {}",
            tokens.len(),
            dataset.len() - tokens.len(),
            alphabet.len()
        );
        Ok(Trainer {
            config,
            tokens,
            alphabet,
            ansatz,
            theta,
            model,
            adam,
            priors,
            epoch: 0,
            reward_history: Vec::new(),
            local,
        })
    }

    /// Resumes from a checkpoint over the same dataset.
    pub fn from_checkpoint(ck: &Checkpoint, dataset: &[MolecularGraph]) -> Result<Trainer, EngineError> {
        if ck.schema_version != CHECKPOINT_SCHEMA {
            return Err(EngineError::Checkpoint(format!("schema_version {} is not supported", ck.schema_version)));
        }
        let config = ck.config.clone();
        config.validate()?;
        let (ansatz, theta) = ck.qcbm.restore()?;
        let model = ck.lstm.restore()?;
        let alphabet = Alphabet::from_listing(&ck.lstm.vocabulary)?;
        let encoded = encode_dataset(dataset);
        let tokens = encoded
            .iter()
            .map(|(_, t)| alphabet.encode_ids(t))
            .collect::<Result<Vec<_>, _>>()?;
        if tokens.len() < MIN_DATASET {
            return Err(EngineError::DatasetTooSmall {
                found: tokens.len(),
                required: MIN_DATASET,
            });
        }
        if ck.adam.m.len() != model.params().len() {
            return Err(EngineError::Checkpoint("optimizer state does not match the weights".into()));
        }
        let used: Vec<&MolecularGraph> = encoded.iter().map(|(i, _)| &dataset[*i]).collect();
        Ok(Trainer {
            config,
            tokens,
            alphabet,
            ansatz,
            theta,
            model,
            adam: ck.adam.clone(),
            priors: ck.priors.clone(),
            epoch: ck.epoch,
            reward_history: ck.reward_history.clone(),
            local: LocalReward::new(NoveltyCache::new(used)),
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn ansatz(&self) -> &QcbmAnsatz {
        &self.ansatz
    }

    pub fn model(&self) -> &LstmModel {
        &self.model
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn priors(&self) -> &[BitString] {
        &self.priors
    }

    pub fn is_done(&self) -> bool {
        if self.epoch >= self.config.total_epochs() {
            return true;
        }
        if self.config.early_stop_plateau && self.reward_history.len() >= PLATEAU_WINDOW {
            let w = &self.reward_history[self.reward_history.len() - PLATEAU_WINDOW..];
            let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
            return hi - lo < PLATEAU_DELTA;
        }
        false
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA,
            epoch: self.epoch,
            config: self.config.clone(),
            qcbm: QcbmCheckpoint::new(&self.ansatz, &self.theta),
            lstm: LstmCheckpoint::new(&self.model, self.alphabet.listing()),
            adam: self.adam.clone(),
            priors: self.priors.clone(),
            rng: RngState {
                master_seed: self.config.master_seed,
                next_epoch: self.epoch,
            },
            reward_history: self.reward_history.clone(),
        }
    }

    fn prior_for<R: Rng>(&self, uniform: bool, rng: &mut R) -> BitString {
        if uniform {
            BitString::new(rng.gen_range(0..1u32 << self.config.n_qubits), self.config.n_qubits)
        } else {
            self.priors[rng.gen_range(0..self.priors.len())]
        }
    }

    fn train_lstm(&mut self, e: usize) -> Result<f64, EngineError> {
        let cfg = self.config.clone();
        let master = cfg.master_seed;
        let uniform = cfg.pretrain_uniform_priors && cfg.schedule == super::Schedule::Pretrain;
        let n = self.tokens.len();
        let per_pass = n.div_ceil(cfg.batch_size);
        let mut losses = Vec::new();
        for pass in 0..cfg.lstm_passes_per_epoch {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng_for(master, Purpose::LstmShuffle, e as u64, pass as u64));
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let bi = (pass * per_pass + b) as u64;
                let mut prng = rng_for(master, Purpose::LstmPriors, e as u64, bi);
                let batch: Vec<Example> = chunk
                    .iter()
                    .map(|&i| Example::teacher_forced(&self.tokens[i], self.prior_for(uniform, &mut prng), START_ID, END_ID))
                    .collect();
                let seed = seed_for(master, Purpose::Dropout, e as u64, bi);
                losses.push(self.model.train_step(&mut self.adam, &batch, cfg.dropout, seed, PAD_ID)?);
            }
        }
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    fn eval_lstm(&self, e: usize) -> Result<f64, NeuralError> {
        let mut prng = rng_for(self.config.master_seed, Purpose::LstmPriors, e as u64, u64::MAX);
        let batch: Vec<Example> = self
            .tokens
            .iter()
            .map(|t| Example::teacher_forced(t, self.prior_for(false, &mut prng), START_ID, END_ID))
            .collect();
        self.model.batch_loss(&batch, PAD_ID)
    }

    fn reward_model(&self, e: usize) -> Result<Box<dyn RewardModel + '_>, EngineError> {
        if self.config.uses_external(e) {
            let cmd = self.config.external_scorer.as_deref().unwrap_or(&[]);
            let timeout = Duration::from_secs_f64(self.config.scorer_timeout_secs);
            return Ok(Box::new(ExternalScorer::new(cmd, timeout)?));
        }
        Ok(match self.config.reward {
            RewardKind::ContainsNitrogen => Box::new(NitrogenReward),
            _ => Box::new(LocalRewardRef(&self.local)),
        })
    }

    /// One pass of the loop; see the module docs for the steps.
    pub fn run_epoch(&mut self) -> Result<EpochReport, EngineError> {
        let started = Instant::now();
        let e = self.epoch;
        let cfg = self.config.clone();
        let master = cfg.master_seed;

        let trained_lstm = cfg.trains_lstm(e);
        let lstm_loss = if trained_lstm { self.train_lstm(e)? } else { self.eval_lstm(e)? };

        let gen = gen_config(cfg.max_len, cfg.temperature);
        let out = generate_from_priors(
            &self.model,
            &self.alphabet,
            &self.priors,
            cfg.molecules_per_prior,
            &gen,
            master,
            e as u64,
        )?;
        let molecules: Vec<Option<MolecularGraph>> = out.iter().map(|g| g.molecule.clone()).collect();
        let rewards = self.reward_model(e)?.score(&molecules)?;
        let mean_reward = rewards.iter().map(|r| r.value()).sum::<f64>() / rewards.len() as f64;
        let samples: Vec<(BitString, f64)> = out.iter().zip(&rewards).map(|(g, r)| (g.prior, r.value())).collect();
        let target = build_target(&samples)?;
        let total = target.total();
        assert!((total - 1.0).abs() < 1e-9, "target mass {total}");

        let trained_qcbm = cfg.trains_qcbm(e);
        let (qcbm_nll, qcbm_evals) = if trained_qcbm {
            let step = qcbm_train_step(&self.ansatz, &self.theta, &target, &cfg.cobyla)?;
            debug!("epoch {e}: nll {:.6} -> {:.6}", step.nll_before, step.nll_after);
            self.theta = step.theta;
            (step.nll_after, step.evals)
        } else {
            (circuit_nll(&self.ansatz, &self.theta, &target)?, 0)
        };

        let m = metrics(&molecules, |g| local_filter(g).passed)?;
        let dist = born_distribution(&build_state(&self.ansatz, &self.theta)?);
        self.priors = sample(
            &dist,
            cfg.priors_per_epoch,
            &mut rng_for(master, Purpose::PriorSample, e as u64 + 1, 0),
        );
        self.epoch += 1;
        self.reward_history.push(mean_reward);
        let report = EpochReport {
            epoch: e,
            mean_reward,
            qcbm_nll,
            lstm_loss,
            sr: m.sr,
            uf: m.uf,
            df: m.df,
            seconds: if cfg.record_wall_time { started.elapsed().as_secs_f64() } else { 0.0 },
            trained_lstm,
            trained_qcbm,
            decode_failures: out.iter().filter(|g| g.molecule.is_none()).count(),
            qcbm_evals,
            prior_rewards: target_rewards(&samples),
            born: (cfg.n_qubits <= BORN_REPORT_MAX_QUBITS).then(|| dist.probs().to_vec()),
        };
        info!(
            "epoch {e}: reward {:.4} nll {:.4} loss {:.4} sr {:.1} uf {:.1} df {:.1}",
            report.mean_reward, report.qcbm_nll, report.lstm_loss, report.sr, report.uf, report.df
        );
        Ok(report)
    }
}

fn target_rewards(samples: &[(BitString, f64)]) -> Vec<(BitString, f64)> {
    crate::reward::aggregate_rewards(samples)
}

struct LocalRewardRef<'a>(&'a LocalReward);

impl RewardModel for LocalRewardRef<'_> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn score(
        &self,
        batch: &[Option<MolecularGraph>],
    ) -> Result<Vec<crate::reward::RewardValue>, crate::reward::RewardError> {
        self.0.score(batch)
    }
}

/// Runs the whole schedule on an in-memory dataset.
pub fn hybrid_train_on(
    config: TrainingConfig,
    dataset: &[MolecularGraph],
) -> Result<(Checkpoint, Vec<EpochReport>), EngineError> {
    let mut t = Trainer::new(config, dataset)?;
    let mut reports = Vec::new();
    while !t.is_done() {
        reports.push(t.run_epoch()?);
    }
    Ok((t.checkpoint(), reports))
}

/// Reads `config.dataset` and runs the whole schedule.
pub fn hybrid_train(config: TrainingConfig) -> Result<(Checkpoint, Vec<EpochReport>), EngineError> {
    config.validate()?;
    let dataset = read_dataset(&config.dataset)?;
    hybrid_train_on(config, &dataset)
}
