//! Pseudo-Laplacian contrastive CP tensor decomposition.
//!
//! The crate factorizes batches of sample tensors with CP alternating least
//! squares while a cross-view signed-graph Laplacian penalty, driven by
//! k-means pseudo-labels over the learned features, rotates the feature
//! space toward class structure. Around that core sit class-preserving
//! time-series augmentations, STFT tensorization, synthetic data generation,
//! a downstream logistic classifier, and binary/JSON file formats used by
//! the `plc` command-line tool.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release -p plc --example full_pipeline
//! ```

pub mod augment;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod loss;
pub mod optim;
pub mod stft;
pub mod synth;
mod linalg;
mod seeding;
pub mod tensor;

pub use error::{Error, Result};
