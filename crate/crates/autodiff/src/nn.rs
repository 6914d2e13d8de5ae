//! Layers built from graph primitives: initialization, LSTM recurrences,
//! bilinear attention, dropout, and entropy.

use rand::Rng;

use crate::error::{AutodiffError, Result};
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamSet};
use crate::tensor::Tensor;

/// Uniform Glorot initialization on `[-√(6/(rows+cols)), √(6/(rows+cols))]`.
pub fn glorot_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        return Err(AutodiffError::ZeroDimension { rows, cols });
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(vec![rows, cols], data)
}

/// Parameters of a single-layer LSTM.
///
/// The gate matrix is `[4·hidden, input + hidden]`, applied to `[x; h_prev]`,
/// with gate blocks in the order input, forget, candidate, output. The bias
/// starts at zero (no forget-gate offset) and there are no peepholes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub weights: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn register<R: Rng + ?Sized>(params: &mut ParamSet, name: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let weights = params.add(format!("{name}.weights"), glorot_init(4 * hidden, input + hidden, rng)?)?;
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(vec![4 * hidden]))?;
        Ok(Self {
            weights,
            bias,
            input,
            hidden,
        })
    }
}

/// Hidden state and memory cell of an LSTM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmState {
    pub fn zeros(g: &mut Graph, hidden: usize) -> Self {
        let h = g.zeros(hidden);
        let c = g.zeros(hidden);
        Self { h, c }
    }
}

pub fn lstm_step(g: &mut Graph, p: &LstmParams, x: Var, prev: LstmState) -> Result<LstmState> {
    if g.dim(x) != p.input {
        return Err(AutodiffError::ShapeMismatch {
            expected: vec![p.input],
            actual: vec![g.dim(x)],
        });
    }
    if g.dim(prev.h) != p.hidden || g.dim(prev.c) != p.hidden {
        return Err(AutodiffError::ShapeMismatch {
            expected: vec![p.hidden],
            actual: vec![g.dim(prev.h), g.dim(prev.c)],
        });
    }
    let xh = g.concat(&[x, prev.h]);
    let pre = g.matvec(p.weights, xh);
    let bias = g.param(p.bias);
    let pre = g.add(pre, bias);
    let n = p.hidden;
    let i = g.slice(pre, 0, n);
    let f = g.slice(pre, n, n);
    let cand = g.slice(pre, 2 * n, n);
    let o = g.slice(pre, 3 * n, n);
    let i = g.sigmoid(i);
    let f = g.sigmoid(f);
    let cand = g.tanh(cand);
    let o = g.sigmoid(o);
    let keep = g.mul(f, prev.c);
    let write = g.mul(i, cand);
    let c = g.add(keep, write);
    let tc = g.tanh(c);
    let h = g.mul(o, tc);
    Ok(LstmState { h, c })
}

/// Runs the recurrence from zero state and returns every hidden state.
pub fn lstm_sequence(g: &mut Graph, p: &LstmParams, inputs: &[Var]) -> Result<Vec<Var>> {
    let mut state = LstmState::zeros(g, p.hidden);
    let mut out = Vec::with_capacity(inputs.len());
    for &x in inputs {
        state = lstm_step(g, p, x, state)?;
        out.push(state.h);
    }
    Ok(out)
}

/// `[→h_j; ←h_j]` for every position `j`.
pub fn bidirectional_encode(g: &mut Graph, forward: &LstmParams, backward: &LstmParams, inputs: &[Var]) -> Result<Vec<Var>> {
    if inputs.is_empty() {
        return Err(AutodiffError::Empty("bidirectional_encode"));
    }
    let fwd = lstm_sequence(g, forward, inputs)?;
    let reversed: Vec<Var> = inputs.iter().rev().copied().collect();
    let mut bwd = lstm_sequence(g, backward, &reversed)?;
    bwd.reverse();
    Ok(fwd.into_iter().zip(bwd).map(|(f, b)| g.concat(&[f, b])).collect())
}

/// Output of a bilinear attention head.
#[derive(Clone, Copy, Debug)]
pub struct Attention {
    pub weights: Var,
    pub context: Var,
}

/// `α_i ∝ exp(h_iᵀ W q)`, `z = Σ α_i h_i` for a `[key_dim, query_dim]`
/// matrix `W`.
pub fn attend(g: &mut Graph, keys: &[Var], query: Var, w: ParamId) -> Result<Attention> {
    check_attention_shapes(g, keys, query, w)?;
    let projected = g.matvec(w, query);
    attend_projected(g, keys, projected)
}

/// Attention from an already projected query `W q`, so callers can insert
/// operations (such as dropout) between the projection and the scoring.
pub fn attend_projected(g: &mut Graph, keys: &[Var], projected: Var) -> Result<Attention> {
    if keys.is_empty() {
        return Err(AutodiffError::Empty("attend"));
    }
    if let Some(bad) = keys.iter().find(|k| g.dim(**k) != g.dim(projected)) {
        return Err(AutodiffError::ShapeMismatch {
            expected: vec![g.dim(projected)],
            actual: vec![g.dim(*bad)],
        });
    }
    let scores = g.dots(keys, projected);
    let weights = g.softmax(scores);
    let context = g.weighted_sum(weights, keys);
    Ok(Attention { weights, context })
}

pub fn check_attention_shapes(g: &Graph, keys: &[Var], query: Var, w: ParamId) -> Result<()> {
    if keys.is_empty() {
        return Err(AutodiffError::Empty("attend"));
    }
    let (rows, cols) = g.params().get(w).rows_cols();
    if g.dim(query) != cols {
        return Err(AutodiffError::ShapeMismatch {
            expected: vec![cols],
            actual: vec![g.dim(query)],
        });
    }
    if let Some(bad) = keys.iter().find(|k| g.dim(**k) != rows) {
        return Err(AutodiffError::ShapeMismatch {
            expected: vec![rows],
            actual: vec![g.dim(*bad)],
        });
    }
    Ok(())
}

/// Inverted dropout: zero each entry with probability `rate` and scale the
/// survivors by `1/(1-rate)`. Identity outside training.
pub fn dropout<R: Rng + ?Sized>(g: &mut Graph, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(AutodiffError::InvalidRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - rate);
    let mask = (0..g.dim(x)).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
    Ok(g.mask(x, mask))
}

/// Tolerance on `Σp = 1` accepted by [`entropy`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

pub fn entropy(g: &mut Graph, p: Var) -> Result<Var> {
    let total: f64 = g.value(p).iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE || g.value(p).iter().any(|v| *v < 0.0) {
        return Err(AutodiffError::Unnormalized(total));
    }
    Ok(g.entropy(p))
}
