//! Core of a single-label patent classifier that averages the label
//! distributions of three section-specific neural networks.
//!
//! Everything in this crate is pure computation over in-memory data and
//! builds without `std` (an allocator is required). File formats, corpus
//! ingestion and the command-line driver live in the `patclass` crate.
//!
//! Layout:
//!
//! * [`tensor`], [`graph`], [`params`], [`optim`]: dense tensors, a
//!   reverse-mode tape and the Adam optimizer.
//! * [`layers`]: embedding, convolution, dense, dropout and recurrent cells.
//! * [`model`]: the five standalone classifiers and their training loop.
//! * [`ensemble`]: per-label averaging over the three section members.
//! * [`metrics`]: Accuracy, Recall@n and the ensemble improvement table.
//! * [`corpus`], [`textprep`], [`embeddings`], [`synth`]: data preparation.
#![no_std]

extern crate alloc;

pub mod corpus;
pub mod dataset;
pub mod embeddings;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod labels;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod real;
pub mod seed;
pub mod synth;
pub mod tensor;
pub mod textprep;

pub use error::{Error, Result};
pub use graph::{Graph, Var};
pub use params::{ParamId, ParamStore};
pub use real::Real;
pub use tensor::Tensor;
