//! Central finite-difference oracle for the tape, in f64.
//!
//! Each case builds a scalar loss from input variables and parameters; the
//! oracle perturbs every input and parameter element by `±EPS` and compares
//! `(L(x+e) - L(x-e)) / 2e` with the analytic gradient.

// The probing loops write into the very buffers they index.
#![allow(dead_code, clippy::needless_range_loop)]

use patclass_core::graph::{Graph, Var};
use patclass_core::layers::{
    self, run_sequence, Activation, Bidirectional, Conv1d, Dense, Embedding, GruCell, LstmCell, RecurrentCell,
};
use patclass_core::params::{ParamId, ParamStore};
use patclass_core::seed;
use patclass_core::tensor::Tensor;
use patclass_core::Result;

pub const EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-5;
/// Relative errors divide by `max(|analytic|, |numeric|, FLOOR)` so that
/// near-zero gradients are compared absolutely.
pub const FLOOR: f64 = 1e-3;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub checked: usize,
    pub max_rel_error: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error <= TOLERANCE
    }
}

type Build = dyn Fn(&mut Graph<'_, f64>, &[Var]) -> Result<Var>;

pub struct Case {
    pub name: &'static str,
    pub store: ParamStore<f64>,
    pub params: Vec<ParamId>,
    pub inputs: Vec<Tensor<f64>>,
    pub build: Box<Build>,
}

fn loss(store: &ParamStore<f64>, inputs: &[Tensor<f64>], build: &Build) -> f64 {
    let mut g = Graph::new(store);
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let l = build(&mut g, &vars).expect("loss builds");
    g.value(l).item().expect("scalar loss")
}

pub fn run(case: Case) -> CheckResult {
    let Case {
        name,
        mut store,
        params,
        mut inputs,
        build,
    } = case;
    let (input_grads, param_grads) = {
        let mut g = Graph::new(&store);
        let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
        let l = build(&mut g, &vars).expect("loss builds");
        let (pg, node_grads) = g.backward_all(l).expect("backward");
        let ig: Vec<Vec<f64>> = vars
            .iter()
            .zip(&inputs)
            .map(|(v, t)| node_grads[v.index()].clone().unwrap_or_else(|| vec![0.0; t.len()]))
            .collect();
        let pgs: Vec<Vec<f64>> = params
            .iter()
            .map(|&id| pg.get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; store.value(id).len()]))
            .collect();
        (ig, pgs)
    };
    let mut worst = 0.0f64;
    let mut checked = 0;
    for k in 0..inputs.len() {
        for i in 0..inputs[k].len() {
            let x = inputs[k].data()[i];
            inputs[k].data_mut()[i] = x + EPS;
            let up = loss(&store, &inputs, &*build);
            inputs[k].data_mut()[i] = x - EPS;
            let down = loss(&store, &inputs, &*build);
            inputs[k].data_mut()[i] = x;
            worst = worst.max(rel_error(input_grads[k][i], (up - down) / (2.0 * EPS)));
            checked += 1;
        }
    }
    for (p, &id) in params.iter().enumerate() {
        for i in 0..store.value(id).len() {
            let x = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = x + EPS;
            let up = loss(&store, &inputs, &*build);
            store.value_mut(id).data_mut()[i] = x - EPS;
            let down = loss(&store, &inputs, &*build);
            store.value_mut(id).data_mut()[i] = x;
            worst = worst.max(rel_error(param_grads[p][i], (up - down) / (2.0 * EPS)));
            checked += 1;
        }
    }
    CheckResult {
        name,
        checked,
        max_rel_error: worst,
    }
}

fn rand(seed_: u64, shape: &[usize], limit: f64) -> Tensor<f64> {
    layers::uniform(&mut seed::rng(seed_), shape, limit)
}

/// Positive values in `[0.1, 1.1)`, for operands that must not be near zero.
fn positive(seed_: u64, shape: &[usize]) -> Tensor<f64> {
    rand(seed_, shape, 0.5).map(|x| x + 0.6)
}

/// Scalar readout `sum(y * w)` with fixed random `w`, so every output element
/// contributes with a distinct weight.
pub fn readout(g: &mut Graph<'_, f64>, y: Var, seed_: u64) -> Result<Var> {
    let w = g.constant(rand(seed_, g.shape(y), 1.0));
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn op_case(name: &'static str, inputs: Vec<Tensor<f64>>, build: impl Fn(&mut Graph<'_, f64>, &[Var]) -> Result<Var> + 'static) -> Case {
    Case {
        name,
        store: ParamStore::new(),
        params: Vec::new(),
        inputs,
        build: Box::new(build),
    }
}

fn all_params(store: &ParamStore<f64>) -> Vec<ParamId> {
    store.iter().map(|(id, _)| id).collect()
}

/// One case per differentiable op and per layer.
pub fn all_cases() -> Vec<Case> {
    let mut cases = vec![
        op_case("matmul", vec![rand(1, &[3, 4], 1.0), rand(2, &[4, 2], 1.0)], |g, v| {
            let y = g.matmul(v[0], v[1])?;
            readout(g, y, 10)
        }),
        op_case("add (broadcast)", vec![rand(3, &[3, 4], 1.0), rand(4, &[4], 1.0)], |g, v| {
            let y = g.add(v[0], v[1])?;
            readout(g, y, 11)
        }),
        op_case("sub", vec![rand(5, &[2, 3], 1.0), rand(6, &[2, 3], 1.0)], |g, v| {
            let y = g.sub(v[0], v[1])?;
            readout(g, y, 12)
        }),
        op_case("mul (broadcast)", vec![rand(7, &[2, 3], 1.0), rand(8, &[2, 1], 1.0)], |g, v| {
            let y = g.mul(v[0], v[1])?;
            readout(g, y, 13)
        }),
        op_case("scale", vec![rand(9, &[5], 1.0)], |g, v| {
            let y = g.scale(v[0], -0.7);
            readout(g, y, 14)
        }),
        op_case("sigmoid", vec![rand(15, &[6], 3.0)], |g, v| {
            let y = g.sigmoid(v[0]);
            readout(g, y, 16)
        }),
        op_case("tanh", vec![rand(17, &[6], 3.0)], |g, v| {
            let y = g.tanh(v[0]);
            readout(g, y, 18)
        }),
        op_case("relu", vec![rand(19, &[8], 1.0)], |g, v| {
            let y = g.relu(v[0]);
            readout(g, y, 20)
        }),
        op_case("concat", vec![rand(21, &[2, 3], 1.0), rand(22, &[2, 2], 1.0)], |g, v| {
            let y = g.concat(&[v[0], v[1]], 1)?;
            readout(g, y, 23)
        }),
        op_case("slice", vec![rand(24, &[2, 5, 3], 1.0)], |g, v| {
            let y = g.slice(v[0], 1, 1, 3)?;
            readout(g, y, 25)
        }),
        op_case("reshape", vec![rand(26, &[2, 6], 1.0)], |g, v| {
            let y = g.reshape(v[0], &[3, 4])?;
            readout(g, y, 27)
        }),
        op_case("max_over_axis", vec![rand(28, &[2, 5, 3], 1.0)], |g, v| {
            let y = g.max_over_axis(v[0], 1)?;
            readout(g, y, 29)
        }),
        op_case("mean_over_axis", vec![rand(30, &[2, 5, 3], 1.0)], |g, v| {
            let y = g.mean_over_axis(v[0], 1)?;
            readout(g, y, 31)
        }),
        op_case("sum", vec![rand(32, &[3, 3], 1.0)], |g, v| {
            let y = g.sum(v[0]);
            g.mul(y, y)
        }),
        op_case("embedding_gather", vec![rand(33, &[5, 3], 1.0)], |g, v| {
            let y = g.embedding_gather(v[0], &[1, 4, 1, 0, 2, 4], &[2, 3], None)?;
            readout(g, y, 34)
        }),
        op_case("conv1d", vec![rand(35, &[2, 6, 3], 1.0), rand(36, &[3, 3, 4], 1.0), rand(37, &[4], 1.0)], |g, v| {
            let y = g.conv1d(v[0], v[1], v[2])?;
            readout(g, y, 38)
        }),
        op_case("softmax", vec![rand(39, &[3, 5], 2.0)], |g, v| {
            let y = g.softmax(v[0], 1)?;
            readout(g, y, 40)
        }),
        op_case("cross_entropy", vec![positive(41, &[2, 4])], |g, v| {
            let t = g.constant(Tensor::new(&[2, 4], vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).expect("shape"));
            g.cross_entropy(v[0], t)
        }),
        op_case("softmax + cross_entropy", vec![rand(42, &[3, 5], 2.0)], |g, v| {
            let p = g.softmax(v[0], 1)?;
            let t = g.constant(Tensor::new(&[3, 5], (0..15).map(|i| if i % 6 == 0 { 1.0 } else { 0.0 }).collect()).expect("shape"));
            g.cross_entropy(p, t)
        }),
    ];

    let mut rng = seed::rng(100);
    let mut store = ParamStore::new();
    let dense = Dense::new(&mut store, &mut rng, "dense", 4, 3, Activation::Relu);
    let head = Dense::new(&mut store, &mut rng, "head", 3, 5, Activation::Softmax);
    let params = all_params(&store);
    cases.push(Case {
        name: "dense (relu, softmax head) + cross_entropy",
        store,
        params,
        inputs: vec![rand(101, &[2, 4], 1.5)],
        build: Box::new(move |g, v| {
            let h = dense.forward(g, v[0])?;
            let p = head.forward(g, h)?;
            let t = g.constant(Tensor::new(&[2, 5], vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).expect("shape"));
            g.cross_entropy(p, t)
        }),
    });

    let mut store = ParamStore::new();
    let conv = Conv1d::new(&mut store, &mut rng, "conv", 3, 4, 2);
    let params = all_params(&store);
    cases.push(Case {
        name: "conv1d layer + max pool",
        store,
        params,
        inputs: vec![rand(102, &[2, 5, 3], 1.0)],
        build: Box::new(move |g, v| {
            let y = conv.forward(g, v[0])?;
            let y = g.max_over_axis(y, 1)?;
            readout(g, y, 103)
        }),
    });

    let mut store = ParamStore::new();
    let emb = Embedding::new(&mut store, "emb", rand(104, &[6, 3], 1.0), true);
    let params = all_params(&store);
    cases.push(Case {
        name: "embedding layer",
        store,
        params,
        inputs: vec![],
        build: Box::new(move |g, _| {
            // index 0 is the padding row, which receives no gradient; it is not read here
            let y = emb.forward(g, &[1, 5, 5, 2, 3, 4], 2, 3)?;
            readout(g, y, 105)
        }),
    });

    let mut store = ParamStore::new();
    let lstm = LstmCell::new(&mut store, &mut rng, "lstm", 3, 4);
    let params = all_params(&store);
    cases.push(Case {
        name: "lstm cell",
        store,
        params,
        inputs: vec![rand(106, &[2, 3], 1.0), rand(107, &[2, 4], 0.8), rand(108, &[2, 4], 0.8)],
        build: Box::new(move |g, v| {
            let s = lstm.step(g, v[0], &layers::RecurrentState { h: v[1], c: Some(v[2]) })?;
            let a = readout(g, s.h, 109)?;
            let b = readout(g, s.c.expect("lstm state"), 110)?;
            g.add(a, b)
        }),
    });

    let mut store = ParamStore::new();
    let gru = GruCell::new(&mut store, &mut rng, "gru", 3, 4);
    let params = all_params(&store);
    cases.push(Case {
        name: "gru cell",
        store,
        params,
        inputs: vec![rand(111, &[2, 3], 1.0), rand(112, &[2, 4], 0.8)],
        build: Box::new(move |g, v| {
            let s = gru.step(g, v[0], &layers::RecurrentState { h: v[1], c: None })?;
            readout(g, s.h, 113)
        }),
    });

    let mut store = ParamStore::new();
    let lstm = LstmCell::new(&mut store, &mut rng, "seq", 3, 3);
    let params = all_params(&store);
    cases.push(Case {
        name: "lstm over masked sequence",
        store,
        params,
        inputs: vec![rand(114, &[3, 4, 3], 1.0)],
        build: Box::new(move |g, v| {
            let s = run_sequence(g, &lstm, v[0], &[4, 2, 3], false)?;
            readout(g, s.h, 115)
        }),
    });

    let mut store = ParamStore::new();
    let bi = Bidirectional {
        forward: LstmCell::new(&mut store, &mut rng, "fwd", 3, 2),
        backward: LstmCell::new(&mut store, &mut rng, "bwd", 3, 2),
    };
    let params = all_params(&store);
    cases.push(Case {
        name: "bidirectional lstm",
        store,
        params,
        inputs: vec![rand(116, &[2, 4, 3], 1.0)],
        build: Box::new(move |g, v| {
            let y = bi.forward(g, v[0], &[4, 3])?;
            readout(g, y, 117)
        }),
    });

    let mut store = ParamStore::new();
    let bi = Bidirectional {
        forward: GruCell::new(&mut store, &mut rng, "fwd", 3, 2),
        backward: GruCell::new(&mut store, &mut rng, "bwd", 3, 2),
    };
    let params = all_params(&store);
    cases.push(Case {
        name: "bidirectional gru",
        store,
        params,
        inputs: vec![rand(118, &[2, 4, 3], 1.0)],
        build: Box::new(move |g, v| {
            let y = bi.forward(g, v[0], &[2, 4])?;
            readout(g, y, 119)
        }),
    });

    cases
}
