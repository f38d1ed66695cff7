//! Hybrid generative pipeline for small molecules: an exactly simulated
//! quantum circuit Born machine supplies bitstring priors to an LSTM over
//! SELFIES tokens, and generated molecules are scored to retrain the prior.

pub mod molgraph;
pub mod selfies;
pub mod qsim;
pub mod optim;
pub mod neural;
pub mod reward;
pub mod engine;
