use std::fmt::Write as _;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::{generate, hybrid_train_on, metrics, EngineError, TrainingConfig};
use crate::molgraph::MolecularGraph;
use crate::reward::local_filter;

pub const SCALING_CSV_HEADER: &str = "n_qubits,sr,uf,df,final_reward,epochs,seconds";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_qubits: usize,
    pub sr: f64,
    pub uf: f64,
    pub df: f64,
    pub final_reward: f64,
    pub epochs: usize,
    /// Wall time of training plus evaluation. Not part of the deterministic
    /// result.
    pub seconds: f64,
}

impl ScalingRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.4},{:.4},{:.4},{:.6},{},{:.3}",
            self.n_qubits, self.sr, self.uf, self.df, self.final_reward, self.epochs, self.seconds
        )
    }
}

/// Trains once per qubit count with the base seed and dataset, then scores
/// `eval_samples` fresh molecules from each trained model.
pub fn qubit_scaling_experiment(
    base: &TrainingConfig,
    dataset: &[MolecularGraph],
    qubit_counts: &[usize],
) -> Result<Vec<ScalingRow>, EngineError> {
    if qubit_counts.is_empty() {
        return Err(EngineError::config("qubits", "no qubit counts given"));
    }
    if let Some(&n) = qubit_counts.iter().find(|&&n| n < 2) {
        return Err(EngineError::config("qubits", format!("{n} is below the minimum of 2")));
    }
    let mut rows = Vec::with_capacity(qubit_counts.len());
    for &n in qubit_counts {
        let started = Instant::now();
        let config = TrainingConfig {
            n_qubits: n,
            ..base.clone()
        };
        let (ck, reports) = hybrid_train_on(config, dataset)?;
        let out = generate(&ck, base.eval_samples, base.temperature, base.master_seed)?;
        let molecules: Vec<_> = out.into_iter().map(|g| g.molecule).collect();
        let m = metrics(&molecules, |g| local_filter(g).passed)?;
        let row = ScalingRow {
            n_qubits: n,
            sr: m.sr,
            uf: m.uf,
            df: m.df,
            final_reward: reports.last().map_or(0.0, |r| r.mean_reward),
            epochs: reports.len(),
            seconds: started.elapsed().as_secs_f64(),
        };
        info!("{n} qubits: sr {:.1} uf {:.1} df {:.1} in {:.1}s", row.sr, row.uf, row.df, row.seconds);
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_scaling_csv(rows: &[ScalingRow]) -> String {
    let mut s = String::from(SCALING_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}
