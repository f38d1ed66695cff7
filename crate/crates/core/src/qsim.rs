//! Exact statevector simulation of the Born-machine ansatz: per layer an
//! Rx then Rz rotation on every qubit followed by a linear CNOT chain.
//! Qubit 0 is the least significant bit of a basis-state index.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = 24;
pub const DEFAULT_ROTATION_LAYERS: usize = 3;
pub const LOG_FLOOR: f64 = 1e-12;
pub const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("theta has {got} entries, ansatz needs {expected}")]
    ParamLengthMismatch { expected: usize, got: usize },
    #[error("distribution has {dist} outcomes but target has {target}")]
    SupportMismatch { dist: usize, target: usize },
    #[error("n_qubits must be in 1..={MAX_QUBITS}, got {0}")]
    InvalidQubitCount(usize),
    #[error("n_rotation_layers must be at least 1")]
    InvalidLayerCount,
    #[error("theta contains a non-finite value")]
    NonFiniteParam,
    #[error("checkpoint schema {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcbmAnsatz {
    n_qubits: usize,
    n_rotation_layers: usize,
}

impl QcbmAnsatz {
    pub fn new(n_qubits: usize, n_rotation_layers: usize) -> Result<QcbmAnsatz, QsimError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QsimError::InvalidQubitCount(n_qubits));
        }
        if n_rotation_layers == 0 {
            return Err(QsimError::InvalidLayerCount);
        }
        Ok(QcbmAnsatz {
            n_qubits,
            n_rotation_layers,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_rotation_layers(&self) -> usize {
        self.n_rotation_layers
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn param_count(&self) -> usize {
        2 * self.n_qubits * self.n_rotation_layers
    }

    /// Index of the Rx angle for `qubit` in `layer`; the Rz angle follows it.
    pub fn rx_index(&self, layer: usize, qubit: usize) -> usize {
        2 * (layer * self.n_qubits + qubit)
    }

    /// Angles drawn uniformly from [-pi, pi).
    pub fn random_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.param_count())
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect()
    }
}

/// A computational-basis outcome. Bit `q` of `value` is qubit `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitString {
    pub value: u32,
    pub n_qubits: u8,
}

impl BitString {
    pub fn new(value: u32, n_qubits: usize) -> BitString {
        debug_assert!(n_qubits <= MAX_QUBITS && (value as u64) < (1u64 << n_qubits));
        BitString {
            value,
            n_qubits: n_qubits as u8,
        }
    }

    pub fn bit(&self, q: usize) -> bool {
        self.value >> q & 1 == 1
    }

    /// Qubit values as 0.0/1.0, qubit 0 first.
    pub fn as_reals(&self) -> Vec<f64> {
        (0..self.n_qubits as usize)
            .map(|q| if self.bit(q) { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.n_qubits as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n_qubits == 0
    }
}

impl fmt::Display for BitString {
    /// Highest qubit first, as in ket notation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n_qubits as usize).rev() {
            f.write_str(if self.bit(q) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn zero(n_qubits: usize) -> Statevector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Statevector { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Statevector {
        assert!(amps.len().is_power_of_two());
        Statevector {
            n_qubits: amps.len().trailing_zeros() as usize,
            amps,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies a 2x2 unitary `[[u00, u01], [u10, u11]]` to qubit `q`.
    pub fn apply_1q(&mut self, q: usize, u: [[Complex64; 2]; 2]) {
        let stride = 1usize << q;
        for block in (0..self.amps.len()).step_by(stride << 1) {
            for i in block..block + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[i + stride] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
    }

    pub fn apply_rx(&mut self, q: usize, phi: f64) {
        self.apply_1q(q, rx_matrix(phi));
    }

    pub fn apply_rz(&mut self, q: usize, phi: f64) {
        self.apply_1q(q, rz_matrix(phi));
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cm, tm) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }
}

pub fn rx_matrix(phi: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (phi / 2.0).sin_cos();
    let d = Complex64::new(c, 0.0);
    let o = Complex64::new(0.0, -s);
    [[d, o], [o, d]]
}

pub fn rz_matrix(phi: f64) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    [
        [Complex64::from_polar(1.0, -phi / 2.0), z],
        [z, Complex64::from_polar(1.0, phi / 2.0)],
    ]
}

fn matmul2(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn build_state(ansatz: &QcbmAnsatz, theta: &[f64]) -> Result<Statevector, QsimError> {
    if theta.len() != ansatz.param_count() {
        return Err(QsimError::ParamLengthMismatch {
            expected: ansatz.param_count(),
            got: theta.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(QsimError::NonFiniteParam);
    }
    let n = ansatz.n_qubits;
    let mut psi = Statevector::zero(n);
    for layer in 0..ansatz.n_rotation_layers {
        for q in 0..n {
            let k = ansatz.rx_index(layer, q);
            // Rx acts first, so it is the right factor
            psi.apply_1q(q, matmul2(rz_matrix(theta[k + 1]), rx_matrix(theta[k])));
        }
        for q in 0..n.saturating_sub(1) {
            psi.apply_cnot(q, q + 1);
        }
    }
    Ok(psi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BornDistribution {
    n_qubits: usize,
    probs: Vec<f64>,
}

impl BornDistribution {
    pub fn from_probs(probs: Vec<f64>) -> BornDistribution {
        assert!(probs.len().is_power_of_two());
        BornDistribution {
            n_qubits: probs.len().trailing_zeros() as usize,
            probs,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: BitString) -> f64 {
        self.probs[x.value as usize]
    }
}

pub fn born_distribution(state: &Statevector) -> BornDistribution {
    BornDistribution {
        n_qubits: state.n_qubits,
        probs: state.amps.iter().map(|a| a.norm_sqr()).collect(),
    }
}

/// Independent multinomial draws.
pub fn sample<R: Rng + ?Sized>(dist: &BornDistribution, count: usize, rng: &mut R) -> Vec<BitString> {
    if count == 0 {
        return Vec::new();
    }
    let mut cdf = Vec::with_capacity(dist.probs.len());
    let mut acc = 0.0;
    for &p in &dist.probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let last_nonzero = dist.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    (0..count)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let k = cdf.partition_point(|&c| c <= u).min(last_nonzero);
            BitString::new(k as u32, dist.n_qubits)
        })
        .collect()
}

/// Cross-entropy of a dense target against the Born distribution, with
/// probabilities floored at `LOG_FLOOR`.
pub fn exact_nll(dist: &BornDistribution, target: &[f64]) -> Result<f64, QsimError> {
    if target.len() != dist.probs.len() {
        return Err(QsimError::SupportMismatch {
            dist: dist.probs.len(),
            target: target.len(),
        });
    }
    Ok(target
        .iter()
        .zip(&dist.probs)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &p)| -t * p.max(LOG_FLOOR).ln())
        .sum())
}

/// Same loss for a sparse target given as (outcome, probability) pairs.
pub fn exact_nll_sparse(dist: &BornDistribution, target: &[(BitString, f64)]) -> Result<f64, QsimError> {
    let mut loss = 0.0;
    for &(x, t) in target {
        if x.n_qubits as usize != dist.n_qubits {
            return Err(QsimError::SupportMismatch {
                dist: dist.probs.len(),
                target: 1 << x.n_qubits,
            });
        }
        if t > 0.0 {
            loss -= t * dist.probs[x.value as usize].max(LOG_FLOOR).ln();
        }
    }
    Ok(loss)
}

pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcbmCheckpoint {
    pub schema_version: u32,
    pub n_qubits: usize,
    pub n_rotation_layers: usize,
    pub theta: Vec<f64>,
}

impl QcbmCheckpoint {
    pub fn new(ansatz: &QcbmAnsatz, theta: &[f64]) -> QcbmCheckpoint {
        QcbmCheckpoint {
            schema_version: CHECKPOINT_SCHEMA,
            n_qubits: ansatz.n_qubits,
            n_rotation_layers: ansatz.n_rotation_layers,
            theta: theta.to_vec(),
        }
    }

    pub fn restore(&self) -> Result<(QcbmAnsatz, Vec<f64>), QsimError> {
        if self.schema_version != CHECKPOINT_SCHEMA {
            return Err(QsimError::Schema {
                found: self.schema_version,
                expected: CHECKPOINT_SCHEMA,
            });
        }
        let ansatz = QcbmAnsatz::new(self.n_qubits, self.n_rotation_layers)?;
        if self.theta.len() != ansatz.param_count() {
            return Err(QsimError::ParamLengthMismatch {
                expected: ansatz.param_count(),
                got: self.theta.len(),
            });
        }
        Ok((ansatz, self.theta.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, LN_2, PI};

    fn probs(n: usize, l: usize, theta: &[f64]) -> Vec<f64> {
        let a = QcbmAnsatz::new(n, l).unwrap();
        born_distribution(&build_state(&a, theta).unwrap()).probs
    }

    #[test]
    fn identity_and_flip() {
        assert!((probs(1, 1, &[0.0, 0.0])[0] - 1.0).abs() < 1e-15);
        assert!((probs(1, 1, &[PI, 0.0])[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bell_like_state() {
        let p = probs(2, 1, &[FRAC_PI_2, 0.0, 0.0, 0.0]);
        for (got, want) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn param_length_checked() {
        let a = QcbmAnsatz::new(3, 2).unwrap();
        assert_eq!(a.param_count(), 12);
        assert_eq!(
            build_state(&a, &[0.0; 5]),
            Err(QsimError::ParamLengthMismatch { expected: 12, got: 5 })
        );
        assert_eq!(QcbmAnsatz::new(16, 3).unwrap().param_count(), 96);
    }

    #[test]
    fn born_examples() {
        let d = born_distribution(&Statevector::zero(1));
        assert_eq!(d.probs(), &[1.0, 0.0]);
        let h = Complex64::new(0.5, 0.0);
        let d = born_distribution(&Statevector::from_amplitudes(vec![h; 4]));
        assert_eq!(d.probs(), &[0.25; 4]);
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let delta = BornDistribution::from_probs(vec![0.0, 0.0, 1.0, 0.0]);
        assert!(sample(&delta, 50, &mut rng).iter().all(|b| b.value == 2));
        assert!(sample(&delta, 0, &mut rng).is_empty());
        let uniform = BornDistribution::from_probs(vec![0.25; 4]);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for b in sample(&uniform, n, &mut ChaCha8Rng::seed_from_u64(1)) {
            counts[b.value as usize] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn nll_examples() {
        let u = BornDistribution::from_probs(vec![0.25; 4]);
        assert!((exact_nll(&u, &[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
        let d = BornDistribution::from_probs(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(exact_nll(&d, &[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        let bell = BornDistribution::from_probs(vec![0.5, 0.0, 0.0, 0.5]);
        assert!((exact_nll(&bell, &[0.5, 0.0, 0.0, 0.5]).unwrap() - LN_2).abs() < 1e-12);
        assert!(matches!(exact_nll(&bell, &[1.0, 0.0]), Err(QsimError::SupportMismatch { .. })));
        let sparse = [(BitString::new(0, 2), 0.5), (BitString::new(3, 2), 0.5)];
        assert!((exact_nll_sparse(&bell, &sparse).unwrap() - LN_2).abs() < 1e-12);
    }

    #[test]
    fn bitstring_order() {
        let b = BitString::new(0b0110, 4);
        assert_eq!(b.to_string(), "0110");
        assert_eq!(b.as_reals(), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let a = QcbmAnsatz::new(4, 3).unwrap();
        let theta = a.random_theta(&mut ChaCha8Rng::seed_from_u64(0));
        let ck = QcbmCheckpoint::new(&a, &theta);
        let json = serde_json::to_string(&ck).unwrap();
        let back: QcbmCheckpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back.restore().unwrap(), (a, theta));
        let bad = QcbmCheckpoint { schema_version: 9, ..back };
        assert!(matches!(bad.restore(), Err(QsimError::Schema { .. })));
    }
}
