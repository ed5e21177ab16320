//! Finite-section residual towers for approximate point pseudospectra of
//! Koopman operators `𝒦_F g = g ∘ F` on `L^p(X, ω)`, `1 < p < ∞`.

pub mod adversary;
pub mod arith;
pub mod cli;
pub mod config;
pub mod dictionary;
pub mod error;
pub mod linalg;
pub mod lipschitz;
pub mod maps;
pub mod markov;
pub mod netsearch;
pub mod rational;
pub mod reference;
pub mod residual;
pub mod sigma1;
pub mod space;
pub mod step;
pub mod tower;

pub use error::{KoopError, Result};
