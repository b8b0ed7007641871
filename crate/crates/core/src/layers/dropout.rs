use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::real::Real;
use crate::seed::Rng;
use crate::tensor::{numel, Tensor};

use super::Mode;

fn check_rate(op: &'static str, rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidOperand {
            op,
            detail: alloc::format!("rate {rate} outside [0, 1)"),
        });
    }
    Ok(())
}

fn mask<R: Real>(rng: &mut Rng, shape: &[usize], rate: f64) -> Tensor<R> {
    let keep = R::lit(1.0 / (1.0 - rate));
    let data: Vec<R> = (0..numel(shape))
        .map(|_| if rng.gen::<f64>() < rate { R::zero() } else { keep })
        .collect();
    Tensor::new(shape, data).expect("mask shape")
}

/// Inverted dropout: zeroes entries with probability `rate` and rescales survivors.
pub fn dropout<R: Real>(g: &mut Graph<'_, R>, x: Var, rate: f64, mode: Mode, rng: &mut Rng) -> Result<Var> {
    check_rate("dropout", rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x);
    }
    let m = mask(rng, g.shape(x), rate);
    let m = g.constant(m);
    g.mul(x, m)
}

/// Drops whole word vectors of a `[batch, len, dim]` tensor.
pub fn spatial_dropout<R: Real>(g: &mut Graph<'_, R>, x: Var, rate: f64, mode: Mode, rng: &mut Rng) -> Result<Var> {
    check_rate("spatial_dropout", rate)?;
    let s = g.shape(x).to_vec();
    if s.len() != 3 {
        return Err(Error::shape("spatial_dropout", &[&s]));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x);
    }
    let m = mask(rng, &[s[0], s[1], 1], rate);
    let m = g.constant(m);
    g.mul(x, m)
}
