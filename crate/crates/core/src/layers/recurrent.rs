use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::real::Real;
use crate::seed::Rng;
use crate::tensor::Tensor;

use super::glorot_uniform;

/// Hidden state of a recurrent cell; `c` is only present for LSTM.
#[derive(Debug, Clone, Copy)]
pub struct RecurrentState {
    pub h: Var,
    pub c: Option<Var>,
}

pub trait RecurrentCell {
    fn hidden_size(&self) -> usize;
    fn zero_state<R: Real>(&self, g: &mut Graph<'_, R>, batch: usize) -> RecurrentState;
    /// One time step on `x_t` of shape `[batch, input]`.
    fn step<R: Real>(&self, g: &mut Graph<'_, R>, x_t: Var, state: &RecurrentState) -> Result<RecurrentState>;
}

/// LSTM with gates packed as `[i | f | g | o]` along the last axis.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub input_weights: ParamId,
    pub recurrent_weights: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Real>(store: &mut ParamStore<R>, rng: &mut Rng, name: &str, input: usize, hidden: usize) -> Self {
        let w = glorot_uniform(rng, &[input, 4 * hidden], input, 4 * hidden);
        let u = glorot_uniform(rng, &[hidden, 4 * hidden], hidden, 4 * hidden);
        let mut b = Tensor::zeros(&[4 * hidden]);
        // forget gate starts open
        b.data_mut()[hidden..2 * hidden].iter_mut().for_each(|x| *x = R::one());
        Self::from_parts(store, name, w, u, b)
    }

    pub fn from_parts<R: Real>(store: &mut ParamStore<R>, name: &str, w: Tensor<R>, u: Tensor<R>, b: Tensor<R>) -> Self {
        let hidden = u.shape()[0];
        LstmCell {
            input_weights: store.add(alloc::format!("{name}.w"), w, true),
            recurrent_weights: store.add(alloc::format!("{name}.u"), u, true),
            bias: store.add(alloc::format!("{name}.b"), b, true),
            hidden,
        }
    }
}

impl RecurrentCell for LstmCell {
    fn hidden_size(&self) -> usize {
        self.hidden
    }

    fn zero_state<R: Real>(&self, g: &mut Graph<'_, R>, batch: usize) -> RecurrentState {
        RecurrentState {
            h: g.constant(Tensor::zeros(&[batch, self.hidden])),
            c: Some(g.constant(Tensor::zeros(&[batch, self.hidden]))),
        }
    }

    fn step<R: Real>(&self, g: &mut Graph<'_, R>, x_t: Var, state: &RecurrentState) -> Result<RecurrentState> {
        let h = self.hidden;
        let c_prev = state.c.ok_or(Error::InvalidOperand {
            op: "lstm_cell",
            detail: "state has no cell vector".into(),
        })?;
        let (w, u, b) = (g.param(self.input_weights), g.param(self.recurrent_weights), g.param(self.bias));
        let xw = g.matmul(x_t, w)?;
        let hu = g.matmul(state.h, u)?;
        let z = g.add(xw, hu)?;
        let z = g.add(z, b)?;
        let i = g.slice(z, 1, 0, h)?;
        let f = g.slice(z, 1, h, h)?;
        let cand = g.slice(z, 1, 2 * h, h)?;
        let o = g.slice(z, 1, 3 * h, h)?;
        let (i, f, o) = (g.sigmoid(i), g.sigmoid(f), g.sigmoid(o));
        let cand = g.tanh(cand);
        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c);
        let h_new = g.mul(o, tc)?;
        Ok(RecurrentState { h: h_new, c: Some(c) })
    }
}

/// GRU; the input projection packs `[z | r | candidate]`, the recurrent
/// projection for `z` and `r` is `[hidden, 2 * hidden]` and the candidate has its own matrix.
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub input_weights: ParamId,
    pub gate_weights: ParamId,
    pub candidate_weights: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<R: Real>(store: &mut ParamStore<R>, rng: &mut Rng, name: &str, input: usize, hidden: usize) -> Self {
        let w = glorot_uniform(rng, &[input, 3 * hidden], input, 3 * hidden);
        let u = glorot_uniform(rng, &[hidden, 2 * hidden], hidden, 2 * hidden);
        let uh = glorot_uniform(rng, &[hidden, hidden], hidden, hidden);
        Self::from_parts(store, name, w, u, uh, Tensor::zeros(&[3 * hidden]))
    }

    pub fn from_parts<R: Real>(
        store: &mut ParamStore<R>,
        name: &str,
        w: Tensor<R>,
        u: Tensor<R>,
        uh: Tensor<R>,
        b: Tensor<R>,
    ) -> Self {
        let hidden = uh.shape()[0];
        GruCell {
            input_weights: store.add(alloc::format!("{name}.w"), w, true),
            gate_weights: store.add(alloc::format!("{name}.u"), u, true),
            candidate_weights: store.add(alloc::format!("{name}.uh"), uh, true),
            bias: store.add(alloc::format!("{name}.b"), b, true),
            hidden,
        }
    }
}

impl RecurrentCell for GruCell {
    fn hidden_size(&self) -> usize {
        self.hidden
    }

    fn zero_state<R: Real>(&self, g: &mut Graph<'_, R>, batch: usize) -> RecurrentState {
        RecurrentState {
            h: g.constant(Tensor::zeros(&[batch, self.hidden])),
            c: None,
        }
    }

    fn step<R: Real>(&self, g: &mut Graph<'_, R>, x_t: Var, state: &RecurrentState) -> Result<RecurrentState> {
        let h = self.hidden;
        let (w, u, uh, b) = (
            g.param(self.input_weights),
            g.param(self.gate_weights),
            g.param(self.candidate_weights),
            g.param(self.bias),
        );
        let xw = g.matmul(x_t, w)?;
        let xw = g.add(xw, b)?;
        let hu = g.matmul(state.h, u)?;
        let xz = g.slice(xw, 1, 0, h)?;
        let xr = g.slice(xw, 1, h, h)?;
        let xc = g.slice(xw, 1, 2 * h, h)?;
        let hz = g.slice(hu, 1, 0, h)?;
        let hr = g.slice(hu, 1, h, h)?;
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z);
        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r);
        let rh = g.mul(r, state.h)?;
        let rc = g.matmul(rh, uh)?;
        let cand = g.add(xc, rc)?;
        let cand = g.tanh(cand);
        // h' = (1 - z) h + z cand = h + z (cand - h)
        let delta = g.sub(cand, state.h)?;
        let delta = g.mul(z, delta)?;
        let h_new = g.add(state.h, delta)?;
        Ok(RecurrentState { h: h_new, c: None })
    }
}

/// Runs `cell` over `x` (`[batch, len, input]`) and returns the final state.
///
/// Step `t` only updates sequence `b` when `t < lengths[b]`; elsewhere the
/// previous state is carried unchanged, so trailing padding has no effect.
/// With `reverse` the steps run from the last position to the first.
pub fn run_sequence<R: Real, C: RecurrentCell>(
    g: &mut Graph<'_, R>,
    cell: &C,
    x: Var,
    lengths: &[usize],
    reverse: bool,
) -> Result<RecurrentState> {
    let s = g.shape(x).to_vec();
    if s.len() != 3 || lengths.len() != s[0] {
        return Err(Error::shape("recurrent", &[&s, &[lengths.len()]]));
    }
    let (batch, len, dim) = (s[0], s[1], s[2]);
    let mut state = cell.zero_state(g, batch);
    let steps: Vec<usize> = if reverse { (0..len).rev().collect() } else { (0..len).collect() };
    for t in steps {
        let active: Vec<bool> = lengths.iter().map(|&l| t < l).collect();
        let live = active.iter().filter(|&&a| a).count();
        if live == 0 {
            continue;
        }
        let x_t = g.slice(x, 1, t, 1)?;
        let x_t = g.reshape(x_t, &[batch, dim])?;
        let next = cell.step(g, x_t, &state)?;
        state = if live == batch {
            next
        } else {
            // select(new, old) as mask * new + (1 - mask) * old: exact for 0/1 masks,
            // so a sequence's result does not depend on its batch neighbours
            let on: Vec<R> = active.iter().map(|&a| if a { R::one() } else { R::zero() }).collect();
            let off: Vec<R> = active.iter().map(|&a| if a { R::zero() } else { R::one() }).collect();
            let on = g.constant(Tensor::new(&[batch, 1], on)?);
            let off = g.constant(Tensor::new(&[batch, 1], off)?);
            let blend = |g: &mut Graph<'_, R>, old: Var, new: Var| -> Result<Var> {
                let a = g.mul(on, new)?;
                let b = g.mul(off, old)?;
                g.add(a, b)
            };
            RecurrentState {
                h: blend(g, state.h, next.h)?,
                c: match (state.c, next.c) {
                    (Some(old), Some(new)) => Some(blend(g, old, new)?),
                    _ => None,
                },
            }
        };
    }
    Ok(state)
}

/// Two cells, one over the sequence and one over its reverse; final hidden
/// states are concatenated as `[forward | backward]`.
#[derive(Debug, Clone, Copy)]
pub struct Bidirectional<C> {
    pub forward: C,
    pub backward: C,
}

impl<C: RecurrentCell> Bidirectional<C> {
    pub fn output_size(&self) -> usize {
        self.forward.hidden_size() + self.backward.hidden_size()
    }

    pub fn forward<R: Real>(&self, g: &mut Graph<'_, R>, x: Var, lengths: &[usize]) -> Result<Var> {
        let f = run_sequence(g, &self.forward, x, lengths, false)?;
        let b = run_sequence(g, &self.backward, x, lengths, true)?;
        g.concat(&[f.h, b.h], 1)
    }
}
