//! LSTM over token ids with a bitstring prior injected at every step,
//! trained by truncation-free backpropagation through time.
//!
//! All weights live in one flat vector so the optimizer and checkpoints
//! treat them uniformly. Gate rows are stacked in the order forget, input,
//! candidate, output, and each gate row multiplies `[h_prev, x]`.

use std::ops::Range;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{AdamState, OptimError};
use crate::qsim::BitString;

pub const CHECKPOINT_SCHEMA: u32 = 1;
pub const ARGMAX_TEMPERATURE: f64 = 1e-6;
const PROJECTION_INIT: f64 = 0.05;
/// Examples per gradient chunk. Fixed so the reduction order does not
/// depend on the number of threads.
const GRAD_CHUNK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    Concat,
    Add,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("prior has {got} bits, model expects {expected}")]
    ModeShapeMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("token id {id} is outside the vocabulary of {vocab}")]
    UnknownTokenId { id: usize, vocab: usize },
    #[error("{what}: lengths {left} and {right} differ")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmDims {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_qubits: usize,
    pub mode: PriorMode,
}

impl LstmDims {
    pub fn input_dim(&self) -> usize {
        match self.mode {
            PriorMode::Concat => self.embed_dim + self.n_qubits,
            PriorMode::Add => self.embed_dim,
        }
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim()
        } else {
            self.hidden_dim
        }
    }

    fn validate(&self) -> Result<(), NeuralError> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(NeuralError::ShapeMismatch("dimensions must be positive".into()));
        }
        if !(1..=2).contains(&self.n_layers) {
            return Err(NeuralError::ShapeMismatch(format!("n_layers {} not in 1..=2", self.n_layers)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LayerBlocks {
    w: Range<usize>,
    b: Range<usize>,
}

/// Offsets of the named blocks inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    embedding: Range<usize>,
    layers: Vec<LayerBlocks>,
    projection: Range<usize>,
    w_out: Range<usize>,
    b_out: Range<usize>,
    total: usize,
}

impl Layout {
    fn new(d: &LstmDims) -> Layout {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let h = d.hidden_dim;
        let embedding = take(d.vocab_size * d.embed_dim);
        let layers = (0..d.n_layers)
            .map(|l| LayerBlocks {
                w: take(4 * h * (h + d.layer_input(l))),
                b: take(4 * h),
            })
            .collect();
        let projection = take(if d.mode == PriorMode::Add { d.n_qubits * d.embed_dim } else { 0 });
        let w_out = take(h * d.vocab_size);
        let b_out = take(d.vocab_size);
        Layout {
            embedding,
            layers,
            projection,
            w_out,
            b_out,
            total: at,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// (name, range) for every block, in storage order.
    pub fn blocks(&self) -> Vec<(String, Range<usize>)> {
        let mut out = vec![("embedding".to_string(), self.embedding.clone())];
        for (l, b) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.w"), b.w.clone()));
            out.push((format!("layer{l}.b"), b.b.clone()));
        }
        out.push(("prior_projection".into(), self.projection.clone()));
        out.push(("w_out".into(), self.w_out.clone()));
        out.push(("b_out".into(), self.b_out.clone()));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> CellState {
        CellState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Row-major `steps x vocab` logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Logits {
    pub vocab: usize,
    pub data: Vec<f64>,
}

impl Logits {
    pub fn steps(&self) -> usize {
        self.data.len() / self.vocab
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.vocab..(t + 1) * self.vocab]
    }
}

/// One teacher-forced training sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    pub prior: BitString,
}

impl Example {
    /// Inputs are `start` followed by the tokens; targets are the tokens
    /// followed by `end`.
    pub fn teacher_forced(tokens: &[usize], prior: BitString, start: usize, end: usize) -> Example {
        let mut inputs = Vec::with_capacity(tokens.len() + 1);
        inputs.push(start);
        inputs.extend_from_slice(tokens);
        let mut targets = tokens.to_vec();
        targets.push(end);
        Example { inputs, targets, prior }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub temperature: f64,
    pub max_len: usize,
    pub start_id: usize,
    pub end_id: usize,
    pub pad_id: usize,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax_at(row: &[f64], k: usize) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
    row[k] - m - s.ln()
}

/// Mean over non-PAD steps of the negative log softmax at the target.
pub fn nll_loss(logits: &Logits, targets: &[usize], pad_id: usize) -> Result<f64, NeuralError> {
    if logits.steps() != targets.len() {
        return Err(NeuralError::LengthMismatch {
            what: "logits and targets",
            left: logits.steps(),
            right: targets.len(),
        });
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (t, &y) in targets.iter().enumerate() {
        if y == pad_id {
            continue;
        }
        if y >= logits.vocab {
            return Err(NeuralError::UnknownTokenId { id: y, vocab: logits.vocab });
        }
        total -= log_softmax_at(logits.row(t), y);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Per-step activations kept for the backward pass.
struct StepTape {
    v: Vec<f64>,
    c_prev: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    mask: Option<Vec<f64>>,
}

struct Tape {
    layers: Vec<Vec<StepTape>>,
    top: Vec<Vec<f64>>,
    logits: Logits,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmModel {
    dims: LstmDims,
    layout: Layout,
    params: Vec<f64>,
}

impl LstmModel {
    pub fn new<R: Rng + ?Sized>(dims: LstmDims, rng: &mut R) -> Result<LstmModel, NeuralError> {
        dims.validate()?;
        let layout = Layout::new(&dims);
        let bound = 1.0 / (dims.hidden_dim as f64).sqrt();
        let mut params = vec![0.0; layout.total];
        for (name, r) in layout.blocks() {
            if name.ends_with(".b") {
                let h = dims.hidden_dim;
                params[r.start..r.start + h].iter_mut().for_each(|v| *v = 1.0);
            } else if name == "b_out" {
            } else {
                let a = if name == "prior_projection" { PROJECTION_INIT } else { bound };
                params[r].iter_mut().for_each(|v| *v = rng.gen_range(-a..a));
            }
        }
        Ok(LstmModel { dims, layout, params })
    }

    pub fn from_params(dims: LstmDims, params: Vec<f64>) -> Result<LstmModel, NeuralError> {
        dims.validate()?;
        let layout = Layout::new(&dims);
        if params.len() != layout.total {
            return Err(NeuralError::LengthMismatch {
                what: "parameter vector",
                left: params.len(),
                right: layout.total,
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::ShapeMismatch("non-finite weight".into()));
        }
        Ok(LstmModel { dims, layout, params })
    }

    pub fn dims(&self) -> &LstmDims {
        &self.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn embedding(&self, token: usize) -> &[f64] {
        let e = self.dims.embed_dim;
        &self.params[self.layout.embedding.start + token * e..][..e]
    }

    /// Merges the prior into an input embedding by concatenation (bits
    /// first) or by adding `bits . prior_projection`.
    pub fn inject_prior(&self, prior: &BitString, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        if prior.len() != self.dims.n_qubits {
            return Err(NeuralError::ModeShapeMismatch {
                expected: self.dims.n_qubits,
                got: prior.len(),
            });
        }
        if x.len() != self.dims.embed_dim {
            return Err(NeuralError::ShapeMismatch(format!(
                "embedding has {} entries, expected {}",
                x.len(),
                self.dims.embed_dim
            )));
        }
        Ok(match self.dims.mode {
            PriorMode::Concat => {
                let mut out = prior.as_reals();
                out.extend_from_slice(x);
                out
            }
            PriorMode::Add => {
                let e = self.dims.embed_dim;
                let p = &self.params[self.layout.projection.clone()];
                let mut out = x.to_vec();
                for q in 0..self.dims.n_qubits {
                    if prior.bit(q) {
                        out.iter_mut().zip(&p[q * e..(q + 1) * e]).for_each(|(o, r)| *o += r);
                    }
                }
                out
            }
        })
    }

    fn gates(&self, layer: usize, x: &[f64], state: &CellState) -> (Vec<f64>, Vec<f64>) {
        let h = self.dims.hidden_dim;
        let blocks = &self.layout.layers[layer];
        let w = &self.params[blocks.w.clone()];
        let b = &self.params[blocks.b.clone()];
        let mut v = Vec::with_capacity(h + x.len());
        v.extend_from_slice(&state.h);
        v.extend_from_slice(x);
        let cols = v.len();
        let z = (0..4 * h)
            .map(|r| b[r] + w[r * cols..(r + 1) * cols].iter().zip(&v).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        (z, v)
    }

    /// One step of the cell equations for `layer`.
    pub fn cell_forward(&self, layer: usize, x: &[f64], state: &CellState) -> Result<CellState, NeuralError> {
        let h = self.dims.hidden_dim;
        if layer >= self.dims.n_layers || x.len() != self.dims.layer_input(layer) || state.h.len() != h || state.c.len() != h
        {
            return Err(NeuralError::ShapeMismatch(format!("layer {layer} input {}", x.len())));
        }
        Ok(self.step(layer, x, state).0)
    }

    fn step(&self, layer: usize, x: &[f64], state: &CellState) -> (CellState, StepTape) {
        let h = self.dims.hidden_dim;
        let (z, v) = self.gates(layer, x, state);
        let f: Vec<f64> = z[..h].iter().map(|&a| sigmoid(a)).collect();
        let i: Vec<f64> = z[h..2 * h].iter().map(|&a| sigmoid(a)).collect();
        let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&a| a.tanh()).collect();
        let o: Vec<f64> = z[3 * h..].iter().map(|&a| sigmoid(a)).collect();
        let c: Vec<f64> = (0..h).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let hn: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        let tape = StepTape {
            v,
            c_prev: state.c.clone(),
            f,
            i,
            g,
            o,
            tanh_c,
            mask: None,
        };
        (CellState { h: hn, c }, tape)
    }

    fn head(&self, h: &[f64]) -> Vec<f64> {
        let vsz = self.dims.vocab_size;
        let w = &self.params[self.layout.w_out.clone()];
        let mut out = self.params[self.layout.b_out.clone()].to_vec();
        for (k, &hk) in h.iter().enumerate() {
            if hk != 0.0 {
                out.iter_mut().zip(&w[k * vsz..(k + 1) * vsz]).for_each(|(o, w)| *o += hk * w);
            }
        }
        out
    }

    fn dropout_mask<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Option<Vec<f64>> {
        if rate <= 0.0 {
            return None;
        }
        let h = self.dims.hidden_dim;
        if rate >= 1.0 {
            return Some(vec![0.0; h]);
        }
        let keep = 1.0 / (1.0 - rate);
        Some((0..h).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect())
    }

    fn run(&self, inputs: &[usize], prior: &BitString, dropout: f64, rng: &mut ChaCha8Rng) -> Result<Tape, NeuralError> {
        if inputs.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let vsz = self.dims.vocab_size;
        let nl = self.dims.n_layers;
        let mut states = vec![CellState::zeros(self.dims.hidden_dim); nl];
        let mut layers: Vec<Vec<StepTape>> = (0..nl).map(|_| Vec::with_capacity(inputs.len())).collect();
        let mut top = Vec::with_capacity(inputs.len());
        let mut logits = Vec::with_capacity(inputs.len() * vsz);
        for &tok in inputs {
            if tok >= vsz {
                return Err(NeuralError::UnknownTokenId { id: tok, vocab: vsz });
            }
            let mut x = self.inject_prior(prior, self.embedding(tok))?;
            for l in 0..nl {
                let (next, mut tape) = self.step(l, &x, &states[l]);
                x = next.h.clone();
                tape.mask = self.dropout_mask(dropout, rng);
                if let Some(m) = &tape.mask {
                    x.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
                states[l] = next;
                layers[l].push(tape);
            }
            logits.extend(self.head(&x));
            top.push(x);
        }
        Ok(Tape {
            layers,
            top,
            logits: Logits { vocab: vsz, data: logits },
        })
    }

    /// Teacher-forced pass. Dropout (inverted) acts on each layer's output
    /// and is drawn from `rng` only when `dropout > 0`.
    pub fn forward_sequence(
        &self,
        inputs: &[usize],
        prior: &BitString,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Logits, NeuralError> {
        Ok(self.run(inputs, prior, dropout, rng)?.logits)
    }

    /// Adds d(scale * summed NLL over non-PAD targets)/d(params) into `grad`.
    /// Returns the summed NLL and the number of counted steps.
    fn accumulate(
        &self,
        ex: &Example,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        pad_id: usize,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<(f64, usize), NeuralError> {
        if ex.inputs.len() != ex.targets.len() {
            return Err(NeuralError::LengthMismatch {
                what: "inputs and targets",
                left: ex.inputs.len(),
                right: ex.targets.len(),
            });
        }
        let tape = self.run(&ex.inputs, &ex.prior, dropout, rng)?;
        let d = &self.dims;
        let (h, vsz, nl) = (d.hidden_dim, d.vocab_size, d.n_layers);
        let steps = ex.inputs.len();

        // Gradient reaching each layer's (dropped) output at each step.
        let mut d_out: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; h]; steps]; nl];
        let mut loss = 0.0;
        let mut counted = 0;
        let w_out = &self.params[self.layout.w_out.clone()];
        for t in 0..steps {
            let y = ex.targets[t];
            if y == pad_id {
                continue;
            }
            if y >= vsz {
                return Err(NeuralError::UnknownTokenId { id: y, vocab: vsz });
            }
            let row = tape.logits.row(t);
            loss -= log_softmax_at(row, y);
            counted += 1;
            let mut dl = softmax(row);
            dl[y] -= 1.0;
            dl.iter_mut().for_each(|v| *v *= scale);
            let x = &tape.top[t];
            for k in 0..h {
                let gw = &mut grad[self.layout.w_out.start + k * vsz..][..vsz];
                gw.iter_mut().zip(&dl).for_each(|(g, v)| *g += x[k] * v);
                d_out[nl - 1][t][k] = w_out[k * vsz..(k + 1) * vsz].iter().zip(&dl).map(|(w, v)| w * v).sum();
            }
            grad[self.layout.b_out.clone()].iter_mut().zip(&dl).for_each(|(g, v)| *g += v);
        }

        for l in (0..nl).rev() {
            let blocks = &self.layout.layers[l];
            let w = &self.params[blocks.w.clone()];
            let cols = h + d.layer_input(l);
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            for t in (0..steps).rev() {
                let s = &tape.layers[l][t];
                let mut dh = d_out[l][t].clone();
                if let Some(m) = &s.mask {
                    dh.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
                dh.iter_mut().zip(&dh_next).for_each(|(a, b)| *a += b);
                let mut dz = vec![0.0; 4 * h];
                for k in 0..h {
                    let dc = dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
                    dz[k] = dc * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
                    dz[h + k] = dc * s.g[k] * s.i[k] * (1.0 - s.i[k]);
                    dz[2 * h + k] = dc * s.i[k] * (1.0 - s.g[k] * s.g[k]);
                    dz[3 * h + k] = dh[k] * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k]);
                    dc_next[k] = dc * s.f[k];
                }
                let mut dv = vec![0.0; cols];
                for (r, &dzr) in dz.iter().enumerate() {
                    if dzr == 0.0 {
                        continue;
                    }
                    let wr = &w[r * cols..(r + 1) * cols];
                    let gr = &mut grad[blocks.w.start + r * cols..][..cols];
                    for c in 0..cols {
                        gr[c] += dzr * s.v[c];
                        dv[c] += dzr * wr[c];
                    }
                    grad[blocks.b.start + r] += dzr;
                }
                dh_next.copy_from_slice(&dv[..h]);
                let dx = &dv[h..];
                if l > 0 {
                    d_out[l - 1][t].iter_mut().zip(dx).for_each(|(a, b)| *a += b);
                } else {
                    let e = d.embed_dim;
                    let dx_embed = match d.mode {
                        PriorMode::Concat => &dx[d.n_qubits..],
                        PriorMode::Add => {
                            for q in 0..d.n_qubits {
                                if ex.prior.bit(q) {
                                    let gp = &mut grad[self.layout.projection.start + q * e..][..e];
                                    gp.iter_mut().zip(dx).for_each(|(g, v)| *g += v);
                                }
                            }
                            dx
                        }
                    };
                    let tok = ex.inputs[t];
                    let ge = &mut grad[self.layout.embedding.start + tok * e..][..e];
                    ge.iter_mut().zip(dx_embed).for_each(|(g, v)| *g += v);
                }
            }
        }
        Ok((loss, counted))
    }

    /// Mean NLL over all non-PAD target steps in the batch and its exact
    /// gradient. Dropout masks for example `k` come from stream `k` of a
    /// generator seeded with `seed`. Work is split into fixed chunks and
    /// reduced in order, so results do not depend on the thread count.
    pub fn loss_and_grad(
        &self,
        batch: &[Example],
        dropout: f64,
        seed: u64,
        pad_id: usize,
    ) -> Result<(f64, Vec<f64>), NeuralError> {
        let total_steps: usize = batch.iter().map(|e| e.targets.iter().filter(|&&y| y != pad_id).count()).sum();
        if total_steps == 0 {
            return Ok((0.0, vec![0.0; self.layout.total]));
        }
        let scale = 1.0 / total_steps as f64;
        let chunks: Vec<(f64, Vec<f64>)> = batch
            .par_chunks(GRAD_CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut grad = vec![0.0; self.layout.total];
                let mut loss = 0.0;
                for (k, ex) in chunk.iter().enumerate() {
                    let mut rng = stream_rng(seed, (ci * GRAD_CHUNK + k) as u64);
                    loss += self.accumulate(ex, dropout, &mut rng, pad_id, scale, &mut grad)?.0;
                }
                Ok((loss, grad))
            })
            .collect::<Result<_, NeuralError>>()?;
        let mut grad = vec![0.0; self.layout.total];
        let mut loss = 0.0;
        for (l, g) in chunks {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((loss * scale, grad))
    }

    /// Mean NLL without gradients; dropout is off.
    pub fn batch_loss(&self, batch: &[Example], pad_id: usize) -> Result<f64, NeuralError> {
        let parts: Vec<(f64, usize)> = batch
            .par_iter()
            .map(|ex| {
                let logits = self.forward_sequence(&ex.inputs, &ex.prior, 0.0, &mut stream_rng(0, 0))?;
                let n = ex.targets.iter().filter(|&&y| y != pad_id).count();
                Ok((nll_loss(&logits, &ex.targets, pad_id)? * n as f64, n))
            })
            .collect::<Result<_, NeuralError>>()?;
        let (s, n) = parts.iter().fold((0.0, 0), |(s, n), (a, b)| (s + a, n + b));
        Ok(if n == 0 { 0.0 } else { s / n as f64 })
    }

    /// One Adam update on the batch; returns the pre-update loss.
    pub fn train_step(
        &mut self,
        adam: &mut AdamState,
        batch: &[Example],
        dropout: f64,
        seed: u64,
        pad_id: usize,
    ) -> Result<f64, NeuralError> {
        let (loss, grad) = self.loss_and_grad(batch, dropout, seed, pad_id)?;
        adam.step(&mut self.params, &grad)?;
        Ok(loss)
    }

    /// Autoregressive generation from the start token. PAD and START are
    /// never drawn; END is masked at the first step so at least one token
    /// is produced. Returned ids exclude START and END.
    pub fn sample_sequence<R: Rng + ?Sized>(
        &self,
        prior: &BitString,
        gen: &GenConfig,
        rng: &mut R,
    ) -> Result<Vec<usize>, NeuralError> {
        let nl = self.dims.n_layers;
        let mut states = vec![CellState::zeros(self.dims.hidden_dim); nl];
        let mut tok = gen.start_id;
        let mut out = Vec::new();
        while out.len() < gen.max_len {
            if tok >= self.dims.vocab_size {
                return Err(NeuralError::UnknownTokenId {
                    id: tok,
                    vocab: self.dims.vocab_size,
                });
            }
            let mut x = self.inject_prior(prior, self.embedding(tok))?;
            for (l, st) in states.iter_mut().enumerate() {
                *st = self.step(l, &x, st).0;
                x = st.h.clone();
            }
            let mut logits = self.head(&x);
            logits[gen.pad_id] = f64::NEG_INFINITY;
            logits[gen.start_id] = f64::NEG_INFINITY;
            if out.is_empty() && self.dims.vocab_size > 3 {
                logits[gen.end_id] = f64::NEG_INFINITY;
            }
            let next = if gen.temperature < ARGMAX_TEMPERATURE {
                logits
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(k, _)| k)
                    .expect("nonempty vocabulary")
            } else {
                let scaled: Vec<f64> = logits.iter().map(|v| v / gen.temperature).collect();
                let p = softmax(&scaled);
                WeightedIndex::new(&p).map_err(|e| NeuralError::ShapeMismatch(e.to_string()))?.sample(rng)
            };
            if next == gen.end_id {
                break;
            }
            out.push(next);
            tok = next;
        }
        Ok(out)
    }
}

/// Independent generator for (seed, stream).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmCheckpoint {
    pub schema_version: u32,
    pub mode: PriorMode,
    pub dims: LstmDims,
    pub weights: Vec<f64>,
    pub vocabulary: Vec<String>,
}

impl LstmCheckpoint {
    pub fn new(model: &LstmModel, vocabulary: Vec<String>) -> LstmCheckpoint {
        LstmCheckpoint {
            schema_version: CHECKPOINT_SCHEMA,
            mode: model.dims.mode,
            dims: model.dims,
            weights: model.params.clone(),
            vocabulary,
        }
    }

    pub fn restore(&self) -> Result<LstmModel, NeuralError> {
        if self.schema_version != CHECKPOINT_SCHEMA {
            return Err(NeuralError::Checkpoint(format!("unsupported schema {}", self.schema_version)));
        }
        if self.mode != self.dims.mode || self.vocabulary.len() != self.dims.vocab_size {
            return Err(NeuralError::Checkpoint("header and dims disagree".into()));
        }
        LstmModel::from_params(self.dims, self.weights.clone())
    }
}
