use rayon::prelude::*;

use super::{rng_for, Checkpoint, EngineError, Purpose};
use crate::molgraph::{write_smiles, AtomOrder, MolecularGraph};
use crate::neural::{GenConfig, LstmModel};
use crate::qsim::{born_distribution, build_state, sample, BitString};
use crate::selfies::{decode, to_text, Alphabet, END_ID, PAD_ID, START_ID};

/// Epoch coordinate used for generation outside training.
const SAMPLING_EPOCH: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub prior: BitString,
    pub selfies: String,
    pub molecule: Option<MolecularGraph>,
    pub smiles: Option<String>,
    pub failure: Option<String>,
}

/// `per_prior` sequences for each prior, in prior order. Sequence `j` draws
/// from its own stream, so the output does not depend on scheduling.
pub fn generate_from_priors(
    model: &LstmModel,
    alphabet: &Alphabet,
    priors: &[BitString],
    per_prior: usize,
    gen: &GenConfig,
    master_seed: u64,
    epoch: u64,
) -> Result<Vec<Generated>, EngineError> {
    let jobs: Vec<(usize, BitString)> = priors
        .iter()
        .flat_map(|&p| std::iter::repeat_n(p, per_prior))
        .enumerate()
        .collect();
    jobs.par_iter()
        .map(|&(j, prior)| {
            let mut rng = rng_for(master_seed, Purpose::Generation, epoch, j as u64);
            let ids = model.sample_sequence(&prior, gen, &mut rng)?;
            let tokens = alphabet.decode_ids(&ids);
            let selfies = to_text(&tokens);
            let (molecule, smiles, failure) = match decode(&tokens) {
                Ok(g) => match write_smiles(&g, AtomOrder::Canonical) {
                    Ok(s) => (Some(g), Some(s), None),
                    Err(e) => (None, None, Some(e.to_string())),
                },
                Err(e) => (None, None, Some(e.to_string())),
            };
            Ok(Generated {
                prior,
                selfies,
                molecule,
                smiles,
                failure,
            })
        })
        .collect()
}

pub(crate) fn gen_config(max_len: usize, temperature: f64) -> GenConfig {
    GenConfig {
        temperature,
        max_len,
        start_id: START_ID,
        end_id: END_ID,
        pad_id: PAD_ID,
    }
}

/// Draws `count` priors from the checkpoint's circuit and one sequence per
/// prior. Decode failures are kept in the output.
pub fn generate(checkpoint: &Checkpoint, count: usize, temperature: f64, seed: u64) -> Result<Vec<Generated>, EngineError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(EngineError::config("temperature", "must be positive"));
    }
    let (ansatz, theta) = checkpoint.qcbm.restore()?;
    let model = checkpoint.lstm.restore()?;
    let alphabet = Alphabet::from_listing(&checkpoint.lstm.vocabulary)?;
    let dist = born_distribution(&build_state(&ansatz, &theta)?);
    let priors = sample(&dist, count, &mut rng_for(seed, Purpose::PriorSample, SAMPLING_EPOCH, 0));
    let gen = gen_config(checkpoint.config.max_len, temperature);
    generate_from_priors(&model, &alphabet, &priors, 1, &gen, seed, SAMPLING_EPOCH)
}
