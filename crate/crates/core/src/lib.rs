//! Region-of-interest attention head for image-level binary classification.
//!
//! An image is summarized by `k` detector boxes, each with a precomputed
//! embedding. The largest box (the anchor) is placed first, the sequence is
//! contextualized by self-attention whose queries and keys are rotated by the
//! box centers, and the anchor's final embedding is scored by an MLP.
//! Training combines binary cross-entropy with a repulsive penalty on the
//! cosine similarity between the non-anchor embeddings.
//!
//! Modules:
//! - [`geometry`]: boxes, top-k selection, anchor choice
//! - [`data`]: JSONL datasets and the planted-signal generator
//! - [`model`]: the network, its gradients and checkpoints
//! - [`loss`]: BCE and the repulsive term
//! - [`train`]: Adam, the training loop and gradient checking
//! - [`metrics`]: AUC, F1, recall at a false-positive budget
//! - [`cli`]: the `roiattn` command-line front end

pub mod cli;
pub mod data;
pub mod error;
pub mod geometry;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
