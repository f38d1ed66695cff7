use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::qsim::BitString;

pub const EPOCH_CSV_HEADER: &str = "epoch,mean_reward,qcbm_nll,lstm_loss,sr,uf,df,seconds";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_reward: f64,
    /// Exact NLL of the circuit against this epoch's target, after any update.
    pub qcbm_nll: f64,
    /// Mean training loss over the epoch's LSTM steps, or the evaluation loss
    /// on the dataset when the LSTM did not train.
    pub lstm_loss: f64,
    pub sr: f64,
    pub uf: f64,
    pub df: f64,
    pub seconds: f64,
    pub trained_lstm: bool,
    pub trained_qcbm: bool,
    pub decode_failures: usize,
    pub qcbm_evals: usize,
    /// Mean reward per distinct prior of this epoch, first-seen order.
    pub prior_rewards: Vec<(BitString, f64)>,
    /// Born distribution after the epoch's update; kept for up to 12 qubits.
    pub born: Option<Vec<f64>>,
}

impl EpochReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.4},{:.4},{:.4},{:.3}",
            self.epoch, self.mean_reward, self.qcbm_nll, self.lstm_loss, self.sr, self.uf, self.df, self.seconds
        )
    }
}

pub fn write_epoch_csv(reports: &[EpochReport]) -> String {
    let mut s = String::from(EPOCH_CSV_HEADER);
    s.push('\n');
    for r in reports {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}
