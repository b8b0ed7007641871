//! File formats, corpus preparation, experiment grids and the command surface
//! around `patclass-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod vocabfile;
pub mod wordvec;

pub use error::{Error, Result};
