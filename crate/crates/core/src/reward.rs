//! Rule-based molecule filter, graded rewards, the external scorer
//! protocol, and the softmax target over prior bitstrings.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::molgraph::{
    descriptors, path_fingerprint, tanimoto, write_smiles, AtomOrder, BondOrder, Element, Fingerprint, MolecularGraph,
    DEFAULT_MAX_PATH_LEN, DEFAULT_WIDTH,
};
use crate::qsim::BitString;

pub const DEFAULT_SCORER_TIMEOUT: Duration = Duration::from_secs(300);
pub const ALLOWED_ELEMENTS: [Element; 7] = [
    Element::C,
    Element::N,
    Element::O,
    Element::S,
    Element::F,
    Element::Cl,
    Element::Br,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    MolecularWeight,
    HeavyAtoms,
    RotatableBonds,
    RingCount,
    MaxRingSize,
    FormalCharge,
    HeteroSingleBond,
    ElementWhitelist,
}

pub const RULES: [Rule; 8] = [
    Rule::MolecularWeight,
    Rule::HeavyAtoms,
    Rule::RotatableBonds,
    Rule::RingCount,
    Rule::MaxRingSize,
    Rule::FormalCharge,
    Rule::HeteroSingleBond,
    Rule::ElementWhitelist,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl FilterReport {
    pub fn rules_passed(&self) -> usize {
        RULES.len() - self.violations.len()
    }
}

/// Applies the eight local rules:
/// MW in [150, 600], 10..=50 heavy atoms, at most 10 rotatable bonds, at
/// least one ring, no ring larger than 8, no formal charges, no single bond
/// joining two atoms from {O, S}, and only C N O S F Cl Br.
pub fn local_filter(g: &MolecularGraph) -> FilterReport {
    let d = descriptors(g);
    let mut v = Vec::new();
    let mut fail = |rule, reason: String| v.push(Violation { rule, reason });
    if !(150.0..=600.0).contains(&d.molecular_weight) {
        fail(Rule::MolecularWeight, format!("molecular weight {:.2} outside [150, 600]", d.molecular_weight));
    }
    if !(10..=50).contains(&d.heavy_atom_count) {
        fail(Rule::HeavyAtoms, format!("{} heavy atoms outside [10, 50]", d.heavy_atom_count));
    }
    if d.rotatable_bond_count > 10 {
        fail(Rule::RotatableBonds, format!("{} rotatable bonds > 10", d.rotatable_bond_count));
    }
    if d.ring_count < 1 {
        fail(Rule::RingCount, "no ring".into());
    }
    if d.max_ring_size > 8 {
        fail(Rule::MaxRingSize, format!("ring of size {} > 8", d.max_ring_size));
    }
    if d.has_charged_atom {
        fail(Rule::FormalCharge, "formal charge present".into());
    }
    let os = |i: usize| matches!(g.atom(i).element, Element::O | Element::S);
    if let Some(b) = g.bonds().iter().find(|b| b.order == BondOrder::Single && os(b.a) && os(b.b)) {
        fail(
            Rule::HeteroSingleBond,
            format!(
                "{}-{} single bond between atoms {} and {}",
                g.atom(b.a).element.symbol(),
                g.atom(b.b).element.symbol(),
                b.a,
                b.b
            ),
        );
    }
    if let Some(a) = g.atoms().iter().find(|a| !ALLOWED_ELEMENTS.contains(&a.element)) {
        fail(Rule::ElementWhitelist, format!("element {} not allowed", a.element.symbol()));
    }
    FilterReport {
        passed: v.is_empty(),
        violations: v,
    }
}

/// A reward in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RewardValue(f64);

impl RewardValue {
    /// Clamps into [0, 1]; NaN maps to 0.
    pub fn new(v: f64) -> RewardValue {
        RewardValue(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Fingerprints of the training molecules, for the novelty term.
#[derive(Clone, Debug, Default)]
pub struct NoveltyCache {
    fingerprints: Vec<Fingerprint>,
}

impl NoveltyCache {
    pub fn new<'a>(training: impl IntoIterator<Item = &'a MolecularGraph>) -> NoveltyCache {
        NoveltyCache {
            fingerprints: training.into_iter().map(fingerprint).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingerprints.is_empty()
    }

    pub fn max_similarity(&self, fp: &Fingerprint) -> f64 {
        self.fingerprints
            .iter()
            .map(|c| tanimoto(fp, c).expect("cache uses one width"))
            .fold(0.0, f64::max)
    }
}

pub fn fingerprint(g: &MolecularGraph) -> Fingerprint {
    path_fingerprint(g, DEFAULT_MAX_PATH_LEN, DEFAULT_WIDTH)
}

/// 0 for a decode failure, 0.1 x (rules passed / 8) when the filter fails,
/// and 0.5 + 0.5 x (1 - max Tanimoto to the training cache) when it passes.
pub fn reward(outcome: Option<&MolecularGraph>, cache: &NoveltyCache) -> RewardValue {
    let Some(g) = outcome else {
        return RewardValue(0.0);
    };
    let report = local_filter(g);
    if !report.passed {
        return RewardValue::new(0.1 * report.rules_passed() as f64 / RULES.len() as f64);
    }
    let novelty = (1.0 - cache.max_similarity(&fingerprint(g))).min(1.0);
    RewardValue::new(0.5 + 0.5 * novelty)
}

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("scorer '{command}' failed: {reason}")]
    SpawnFailure { command: String, reason: String },
    #[error("scorer '{command}' did not finish within {seconds} s")]
    Timeout { command: String, seconds: f64 },
    #[error("scorer returned {got} scores for {expected} molecules")]
    CountMismatch { expected: usize, got: usize },
    #[error("scorer output line {line} is not a real number: '{text}'")]
    ParseFailure { line: usize, text: String },
    #[error("empty batch")]
    EmptyBatch,
}

/// Scores a generation batch; `None` marks a decode failure.
pub trait RewardModel: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, batch: &[Option<MolecularGraph>]) -> Result<Vec<RewardValue>, RewardError>;
}

pub struct LocalReward {
    cache: NoveltyCache,
}

impl LocalReward {
    pub fn new(cache: NoveltyCache) -> LocalReward {
        LocalReward { cache }
    }
}

impl RewardModel for LocalReward {
    fn name(&self) -> &str {
        "local"
    }

    fn score(&self, batch: &[Option<MolecularGraph>]) -> Result<Vec<RewardValue>, RewardError> {
        Ok(batch.par_iter().map(|g| reward(g.as_ref(), &self.cache)).collect())
    }
}

/// 1 when the molecule contains nitrogen, else 0.
pub struct NitrogenReward;

impl RewardModel for NitrogenReward {
    fn name(&self) -> &str {
        "contains_nitrogen"
    }

    fn score(&self, batch: &[Option<MolecularGraph>]) -> Result<Vec<RewardValue>, RewardError> {
        Ok(batch
            .iter()
            .map(|g| {
                let hit = g.as_ref().is_some_and(|g| g.atoms().iter().any(|a| a.element == Element::N));
                RewardValue(if hit { 1.0 } else { 0.0 })
            })
            .collect())
    }
}

/// Child-process scorer: SMILES lines in on stdin, one real per line out on
/// stdout, same order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalScorer {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl ExternalScorer {
    pub fn new(command: &[String], timeout: Duration) -> Result<ExternalScorer, RewardError> {
        let (program, args) = command.split_first().ok_or_else(|| RewardError::SpawnFailure {
            command: String::new(),
            reason: "empty command".into(),
        })?;
        Ok(ExternalScorer {
            program: program.clone(),
            args: args.to_vec(),
            timeout,
        })
    }

    fn label(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Runs one child for the whole batch.
    pub fn external_reward(&self, molecules: &[String]) -> Result<Vec<f64>, RewardError> {
        let spawn_err = |reason: String| RewardError::SpawnFailure {
            command: self.label(),
            reason,
        };
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| spawn_err(e.to_string()))?;
        let mut input = String::with_capacity(molecules.len() * 40);
        for m in molecules {
            input.push_str(m);
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("piped");
        let writer = thread::spawn(move || {
            // A child that exits early closes the pipe; that shows up as a
            // count mismatch or exit status instead.
            let _ = stdin.write_all(input.as_bytes());
        });
        let mut stdout = child.stdout.take().expect("piped");
        let reader = thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let mut stderr = child.stderr.take().expect("piped");
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let status = match child.wait_timeout(self.timeout).map_err(|e| spawn_err(e.to_string()))? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(RewardError::Timeout {
                    command: self.label(),
                    seconds: self.timeout.as_secs_f64(),
                });
            }
        };
        let _ = writer.join();
        let out = reader
            .join()
            .expect("reader thread")
            .map_err(|e| spawn_err(format!("reading output: {e}")))?;
        let err = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(spawn_err(format!("exit status {status}: {}", err.trim())));
        }
        let lines: Vec<&str> = out.lines().collect();
        if lines.len() != molecules.len() {
            return Err(RewardError::CountMismatch {
                expected: molecules.len(),
                got: lines.len(),
            });
        }
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| match l.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(RewardError::ParseFailure {
                    line: i + 1,
                    text: l.to_string(),
                }),
            })
            .collect()
    }
}

impl RewardModel for ExternalScorer {
    fn name(&self) -> &str {
        "external"
    }

    /// Decode failures score 0 and are not sent to the child. Returned
    /// values are clamped into [0, 1].
    fn score(&self, batch: &[Option<MolecularGraph>]) -> Result<Vec<RewardValue>, RewardError> {
        let smiles: Vec<(usize, String)> = batch
            .iter()
            .enumerate()
            .filter_map(|(i, g)| {
                let g = g.as_ref()?;
                write_smiles(g, AtomOrder::Canonical).ok().map(|s| (i, s))
            })
            .collect();
        let mut out = vec![RewardValue(0.0); batch.len()];
        if smiles.is_empty() {
            return Ok(out);
        }
        let texts: Vec<String> = smiles.iter().map(|(_, s)| s.clone()).collect();
        for ((i, _), v) in smiles.iter().zip(self.external_reward(&texts)?) {
            out[*i] = RewardValue::new(v);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetDistribution {
    entries: Vec<(BitString, f64)>,
}

impl TargetDistribution {
    /// Explicit target; weights are normalized. Zero weights are dropped.
    pub fn from_weights(weights: &[(BitString, f64)]) -> Result<TargetDistribution, RewardError> {
        let z: f64 = weights.iter().map(|e| e.1).sum();
        if weights.iter().any(|e| e.1 < 0.0 || !e.1.is_finite()) || z.is_nan() || z <= 0.0 {
            return Err(RewardError::EmptyBatch);
        }
        Ok(TargetDistribution {
            entries: weights.iter().filter(|e| e.1 > 0.0).map(|&(x, w)| (x, w / z)).collect(),
        })
    }

    pub fn entries(&self) -> &[(BitString, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Probabilities over all 2^n outcomes.
    pub fn dense(&self, n_qubits: usize) -> Vec<f64> {
        let mut p = vec![0.0; 1 << n_qubits];
        for &(x, v) in &self.entries {
            p[x.value as usize] += v;
        }
        p
    }
}

/// Mean reward per distinct bitstring, in first-seen order.
pub fn aggregate_rewards(samples: &[(BitString, f64)]) -> Vec<(BitString, f64)> {
    let mut order: Vec<BitString> = Vec::new();
    let mut sums: HashMap<BitString, (f64, usize)> = HashMap::new();
    for &(x, r) in samples {
        let e = sums.entry(x).or_insert_with(|| {
            order.push(x);
            (0.0, 0)
        });
        e.0 += r;
        e.1 += 1;
    }
    order
        .into_iter()
        .map(|x| {
            let (s, n) = sums[&x];
            (x, s / n as f64)
        })
        .collect()
}

/// Softmax of the rewards after averaging duplicate bitstrings.
pub fn build_target(samples: &[(BitString, f64)]) -> Result<TargetDistribution, RewardError> {
    if samples.is_empty() {
        return Err(RewardError::EmptyBatch);
    }
    let agg = aggregate_rewards(samples);
    let m = agg.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = agg.iter().map(|e| (e.1 - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(TargetDistribution {
        entries: agg.iter().zip(exps).map(|(e, w)| (e.0, w / z)).collect(),
    })
}
