use alloc::vec::Vec;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::Tensor;

/// Row lookup into a `[rows, dim]` matrix. Row 0 is padding: zero and never updated.
#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
    pub rows: usize,
    pub dim: usize,
}

pub const PAD_INDEX: usize = 0;

impl Embedding {
    pub fn new<R: Real>(store: &mut ParamStore<R>, name: &str, matrix: Tensor<R>, trainable: bool) -> Self {
        let (rows, dim) = (matrix.shape()[0], matrix.shape()[1]);
        let table = store.add(name, matrix, trainable);
        Embedding { table, rows, dim }
    }

    /// `indices` holds `batch` rows of `len` token indices; output is `[batch, len, dim]`.
    pub fn forward<R: Real>(&self, g: &mut Graph<'_, R>, indices: &[u32], batch: usize, len: usize) -> Result<Var> {
        let idx: Vec<usize> = indices.iter().map(|&i| i as usize).collect();
        let table = g.param(self.table);
        g.embedding_gather(table, &idx, &[batch, len], Some(PAD_INDEX))
    }
}
