use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::real::Real;
use crate::seed::Rng;
use crate::tensor::Tensor;

use super::glorot_uniform;

/// 1-D convolution over the sequence axis followed by ReLU.
#[derive(Debug, Clone, Copy)]
pub struct Conv1d {
    pub kernels: ParamId,
    pub bias: ParamId,
    pub width: usize,
    pub filters: usize,
}

impl Conv1d {
    pub fn new<R: Real>(store: &mut ParamStore<R>, rng: &mut Rng, name: &str, in_dim: usize, filters: usize, width: usize) -> Self {
        let kernels = glorot_uniform(rng, &[width, in_dim, filters], width * in_dim, width * filters);
        let kernels = store.add(alloc::format!("{name}.kernels"), kernels, true);
        let bias = store.add(alloc::format!("{name}.bias"), Tensor::zeros(&[filters]), true);
        Conv1d {
            kernels,
            bias,
            width,
            filters,
        }
    }

    /// `[batch, len, in] -> [batch, len - width + 1, filters]`.
    pub fn forward<R: Real>(&self, g: &mut Graph<'_, R>, x: Var) -> Result<Var> {
        let (k, b) = (g.param(self.kernels), g.param(self.bias));
        let y = g.conv1d(x, k, b)?;
        Ok(g.relu(y))
    }
}
