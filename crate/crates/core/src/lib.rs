//! Lexical semantic change detection.
//!
//! The centre of the crate is a dynamic Bayesian mixture over word senses in
//! which each time bin carries its own sense and word distributions and each
//! genre its own distribution over senses (the genre-aware model; with a
//! single genre it reduces to the genre-unaware one). Inference is a blocked
//! Gibbs sampler, and posterior sense trajectories are turned into binary
//! change decisions with a two-standard-deviation rule.
//!
//! Around it sit the embedding baselines (skip-gram with negative sampling,
//! temporal referencing, orthogonal Procrustes alignment with Gamma
//! thresholding) and an evaluation harness for the binary change task.

pub mod changepoint;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod model;
mod truncnorm;

pub use error::{Error, Result};
