use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rng_for, EngineError, Purpose};
use crate::molgraph::{canonical_key, tanimoto, MolecularGraph};
use crate::reward::fingerprint;

pub const MAX_DIVERSITY_PAIRS: usize = 1000;

/// Percentages in [0, 100].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Share of all molecules (decode failures included) passing the filter.
    pub sr: f64,
    /// Distinct canonical keys among decoded molecules.
    pub uf: f64,
    /// 100 x (1 - mean pairwise Tanimoto) over decoded molecules.
    pub df: f64,
    pub n_total: usize,
    pub n_decoded: usize,
    pub n_passed: usize,
    pub n_unique: usize,
}

/// SR, UF and DF for a batch; `None` entries are decode failures. All
/// pairs are used for DF when there are at most `MAX_DIVERSITY_PAIRS`,
/// otherwise that many pairs are drawn from a fixed-seed stream.
pub fn metrics<F>(molecules: &[Option<MolecularGraph>], filter: F) -> Result<MetricsReport, EngineError>
where
    F: Fn(&MolecularGraph) -> bool + Sync,
{
    metrics_seeded(molecules, filter, 0)
}

/// As [`metrics`], with the pair-sampling stream taken from `seed`.
pub fn metrics_seeded<F>(molecules: &[Option<MolecularGraph>], filter: F, seed: u64) -> Result<MetricsReport, EngineError>
where
    F: Fn(&MolecularGraph) -> bool + Sync,
{
    if molecules.is_empty() {
        return Err(EngineError::EmptyBatch);
    }
    let decoded: Vec<&MolecularGraph> = molecules.iter().flatten().collect();
    let n_passed = decoded.par_iter().filter(|g| filter(g)).count();
    let keys: HashSet<String> = decoded.par_iter().map(|g| canonical_key(g)).collect();
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };

    let n = decoded.len();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let pairs: Vec<(usize, usize)> = if total_pairs <= MAX_DIVERSITY_PAIRS {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = rng_for(seed, Purpose::Metrics, 0, 0);
        (0..MAX_DIVERSITY_PAIRS)
            .map(|_| {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect()
    };
    let df = if pairs.is_empty() {
        0.0
    } else {
        let fps: Vec<_> = decoded.par_iter().map(|g| fingerprint(g)).collect();
        let sims: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| tanimoto(&fps[i], &fps[j]).expect("same width"))
            .collect();
        let mean = sims.iter().sum::<f64>() / sims.len() as f64;
        (100.0 * (1.0 - mean)).clamp(0.0, 100.0)
    };
    Ok(MetricsReport {
        sr: pct(n_passed, molecules.len()),
        uf: pct(keys.len(), n),
        df,
        n_total: molecules.len(),
        n_decoded: n,
        n_passed,
        n_unique: keys.len(),
    })
}
