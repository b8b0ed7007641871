//! Layers built on the tape: each owns [`ParamId`](crate::ParamId)s into a
//! shared store and exposes a forward function over [`Graph`](crate::Graph) nodes.

mod conv;
mod dense;
mod dropout;
mod embedding;
mod recurrent;

pub use conv::Conv1d;
pub use dense::{Activation, Dense};
pub use dropout::{dropout, spatial_dropout};
pub use embedding::Embedding;
pub use recurrent::{run_sequence, Bidirectional, GruCell, LstmCell, RecurrentCell, RecurrentState};

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::real::Real;
use crate::seed::Rng;
use crate::tensor::{numel, Tensor};

/// Dropout and spatial dropout are active only in `Train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

pub fn uniform<R: Real>(rng: &mut Rng, shape: &[usize], limit: f64) -> Tensor<R> {
    let data: Vec<R> = (0..numel(shape)).map(|_| R::lit(rng.gen_range(-limit..=limit))).collect();
    Tensor::new(shape, data).expect("shape and data agree")
}

/// Glorot/Xavier uniform: `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Real>(rng: &mut Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<R> {
    let limit = num_traits::Float::sqrt(6.0 / (fan_in + fan_out) as f64);
    uniform(rng, shape, limit)
}
