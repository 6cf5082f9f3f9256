//! Multi-sense word embeddings driven by contextual loss.
//!
//! A skip-gram negative-sampling model is trained over a materialized
//! occurrence store. Words whose average positive-pair loss stays high are
//! treated as ambiguous: their occurrences are clustered in two by context
//! and the second cluster gets its own input vector. Training and splitting
//! alternate for a fixed number of rounds. The `eval` module scores the
//! resulting sense vectors on word-similarity datasets.
//!
//! The `parallel` feature (on by default) enables lock-free multi-threaded
//! training and parallel clustering across words; with `threads = 1`, or
//! with the feature off, every step is sequential and deterministic.

pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod loss;
pub mod math;
mod parallel;
pub mod pipeline;
pub mod split;
pub mod synthetic;
pub mod trainer;

pub use config::{PartialConfig, RunConfig};
pub use corpus::{Occurrence, OccurrenceStore, SenseId, Vocabulary, WordId};
pub use embeddings::SenseVectors;
pub use error::{Error, Result};
pub use loss::{CandidateFilter, LossLedger};
pub use parallel::default_threads;
pub use split::{ClusterSolution, Clusterer};
pub use trainer::{NegativeSampler, SenseModel};
