//! Model-agnostic toolkit for keyphrase experiments: corpus handling,
//! stemming-based exact/partial matching, F1 metrics, majority voting over
//! generated sequences, verdict filtering, co-occurrence-graph negative
//! sampling and randomized Tukey HSD significance testing.

pub mod aggregate;
pub mod corpus;
pub mod error;
pub mod matcher;
pub mod metrics;
pub mod pipeline;
pub mod sampler;
pub mod significance;
pub mod textnorm;

pub use error::{KpError, Result};
