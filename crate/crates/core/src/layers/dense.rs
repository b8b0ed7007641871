use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::real::Real;
use crate::seed::Rng;
use crate::tensor::Tensor;

use super::glorot_uniform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Softmax,
}

/// Fully connected layer on `[batch, in]` inputs.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub units: usize,
    pub activation: Activation,
}

impl Dense {
    pub fn new<R: Real>(
        store: &mut ParamStore<R>,
        rng: &mut Rng,
        name: &str,
        in_dim: usize,
        units: usize,
        activation: Activation,
    ) -> Self {
        let w = glorot_uniform(rng, &[in_dim, units], in_dim, units);
        Self::from_parts(store, name, w, Tensor::zeros(&[units]), activation)
    }

    pub fn from_parts<R: Real>(
        store: &mut ParamStore<R>,
        name: &str,
        weight: Tensor<R>,
        bias: Tensor<R>,
        activation: Activation,
    ) -> Self {
        let units = weight.shape()[1];
        let weight = store.add(alloc::format!("{name}.weight"), weight, true);
        let bias = store.add(alloc::format!("{name}.bias"), bias, true);
        Dense {
            weight,
            bias,
            units,
            activation,
        }
    }

    pub fn forward<R: Real>(&self, g: &mut Graph<'_, R>, x: Var) -> Result<Var> {
        if g.shape(x).len() != 2 {
            return Err(Error::shape("dense", &[g.shape(x)]));
        }
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        let y = g.matmul(x, w)?;
        let y = g.add(y, b)?;
        Ok(match self.activation {
            Activation::Linear => y,
            Activation::Relu => g.relu(y),
            Activation::Softmax => g.softmax(y, 1)?,
        })
    }
}
