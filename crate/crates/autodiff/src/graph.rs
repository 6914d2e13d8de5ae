use crate::error::{AutodiffError, Result};
use crate::params::{Gradients, ParamId, ParamSet};

/// Probabilities below this are clamped before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    Row { param: ParamId, row: usize },
    MatVec { param: ParamId, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Mask(Var, Vec<f64>),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Dot(Var, Var),
    Sum(Var),
    Dots { keys: Vec<Var>, query: Var },
    Softmax(Var),
    LogSoftmax(Var),
    WeightedSum { weights: Var, items: Vec<Var> },
    Gather { x: Var, idx: Vec<usize> },
    Entropy(Var),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    /// Empty for parameter nodes, whose values live in the [`ParamSet`].
    value: Vec<f64>,
}

/// A single-use tape of vector operations.
///
/// Every node is a flat vector. Matrices only appear as parameters and are
/// consumed by [`Graph::matvec`] and [`Graph::row`]. Nodes are appended in
/// evaluation order, so the reverse sweep is a simple backwards scan.
///
/// Length mismatches between operands are programming errors and panic.
pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match self.nodes[v.0].op {
            Op::Param(id) => self.params.get(id).data(),
            _ => &self.nodes[v.0].value,
        }
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        assert_eq!(val.len(), 1, "scalar() on a node of length {}", val.len());
        val[0]
    }

    pub fn dim(&self, v: Var) -> usize {
        self.value(v).len()
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// A constant leaf. Gradients with respect to it are available from
    /// [`Adjoints`] but never reach a parameter.
    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Input, value)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.input(vec![0.0; n])
    }

    /// The whole parameter, flattened. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(Op::Param(id), Vec::new());
        self.param_vars[id.0] = Some(v);
        v
    }

    /// One row of a matrix parameter (an embedding lookup).
    pub fn row(&mut self, param: ParamId, row: usize) -> Var {
        let value = self.params.get(param).row(row).to_vec();
        self.push(Op::Row { param, row }, value)
    }

    /// `W x` for a `[rows, cols]` parameter and a `cols`-vector.
    pub fn matvec(&mut self, param: ParamId, x: Var) -> Var {
        let w = self.params.get(param);
        let (rows, cols) = w.rows_cols();
        let xv = self.value(x);
        assert_eq!(
            xv.len(),
            cols,
            "matvec: {} has {} columns, input has {}",
            self.params.name(param),
            cols,
            xv.len()
        );
        let data = w.data();
        let value = (0..rows)
            .map(|r| data[r * cols..(r + 1) * cols].iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        self.push(Op::MatVec { param, x }, value)
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "elementwise op on lengths {} and {}", av.len(), bv.len());
        av.iter().zip(bv).map(|(x, y)| f(*x, *y)).collect()
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.value(a).iter().map(|x| f(*x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.binary(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.binary(a, b, |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.binary(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let v = self.unary(a, |x| x * factor);
        self.push(Op::Scale(a, factor), v)
    }

    /// Elementwise product with a constant vector.
    pub fn mask(&mut self, a: Var, mask: Vec<f64>) -> Var {
        let av = self.value(a);
        assert_eq!(av.len(), mask.len(), "mask length");
        let v = av.iter().zip(&mask).map(|(x, m)| x * m).collect();
        self.push(Op::Mask(a, mask), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.unary(a, f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.unary(a, sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    /// Natural log with inputs clamped to at least [`LOG_CLAMP`].
    pub fn log(&mut self, a: Var) -> Var {
        let v = self.unary(a, |x| x.max(LOG_CLAMP).ln());
        self.push(Op::Log(a), v)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut value = Vec::with_capacity(parts.iter().map(|p| self.dim(*p)).sum());
        for p in parts {
            value.extend_from_slice(self.value(*p));
        }
        self.push(Op::Concat(parts.to_vec()), value)
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let value = self.value(x)[start..start + len].to_vec();
        self.push(Op::Slice { x, start }, value)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "dot on lengths {} and {}", av.len(), bv.len());
        let v = av.iter().zip(bv).map(|(x, y)| x * y).sum();
        self.push(Op::Dot(a, b), vec![v])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().sum();
        self.push(Op::Sum(a), vec![v])
    }

    /// `[k_1 · q, ..., k_n · q]`.
    pub fn dots(&mut self, keys: &[Var], query: Var) -> Var {
        let qv = self.value(query);
        let value = keys
            .iter()
            .map(|k| {
                let kv = self.value(*k);
                assert_eq!(kv.len(), qv.len(), "dots: key length {} vs query {}", kv.len(), qv.len());
                kv.iter().zip(qv).map(|(x, y)| x * y).sum()
            })
            .collect();
        self.push(
            Op::Dots {
                keys: keys.to_vec(),
                query,
            },
            value,
        )
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let v = softmax(self.value(a));
        self.push(Op::Softmax(a), v)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let v = log_softmax(self.value(a));
        self.push(Op::LogSoftmax(a), v)
    }

    /// `Σ_i w_i · items_i`.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Var {
        let wv = self.value(weights);
        assert_eq!(
            wv.len(),
            items.len(),
            "weighted_sum: {} weights for {} items",
            wv.len(),
            items.len()
        );
        assert!(!items.is_empty(), "weighted_sum over nothing");
        let dim = self.dim(items[0]);
        let mut value = vec![0.0; dim];
        for (w, item) in wv.iter().zip(items) {
            let iv = self.value(*item);
            assert_eq!(iv.len(), dim, "weighted_sum: ragged items");
            for (z, x) in value.iter_mut().zip(iv) {
                *z += w * x;
            }
        }
        self.push(
            Op::WeightedSum {
                weights,
                items: items.to_vec(),
            },
            value,
        )
    }

    /// `[x[idx_0], x[idx_1], ...]`; indices may repeat.
    pub fn gather(&mut self, x: Var, idx: Vec<usize>) -> Var {
        let xv = self.value(x);
        let value = idx.iter().map(|&i| xv[i]).collect();
        self.push(Op::Gather { x, idx }, value)
    }

    /// Shannon entropy `-Σ p log p` of a probability vector, with `p` clamped
    /// below at [`LOG_CLAMP`] inside the logarithm.
    pub fn entropy(&mut self, p: Var) -> Var {
        let v = entropy(self.value(p));
        self.push(Op::Entropy(p), vec![v])
    }

    /// Reverse sweep from a scalar `loss`, adding parameter gradients into
    /// `grads`. Returns adjoints of every non-parameter node.
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Result<Adjoints> {
        let n = self.dim(loss);
        if n != 1 {
            return Err(AutodiffError::NotScalar(n));
        }
        grads.check_matches(self.params)?;
        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        adj[loss.0] = vec![1.0];
        for i in (0..=loss.0).rev() {
            let g = std::mem::take(&mut adj[i]);
            if g.is_empty() {
                continue;
            }
            self.propagate(i, &g, &mut adj, grads);
            adj[i] = g;
        }
        Ok(Adjoints { adj })
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Vec<f64>], grads: &mut Gradients) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Input => {}
            Op::Param(id) => add_into(grads.get_mut(*id), g),
            Op::Row { param, row } => {
                let cols = self.params.get(*param).rows_cols().1;
                add_into(&mut grads.get_mut(*param)[row * cols..(row + 1) * cols], g);
            }
            Op::MatVec { param, x } => {
                let w = self.params.get(*param);
                let (rows, cols) = w.rows_cols();
                let xv = self.value(*x);
                let gw = grads.get_mut(*param);
                for r in 0..rows {
                    let gr = g[r];
                    if gr != 0.0 {
                        for (dst, xc) in gw[r * cols..(r + 1) * cols].iter_mut().zip(xv) {
                            *dst += gr * xc;
                        }
                    }
                }
                let data = w.data();
                let gx = self.slot(*x, adj, grads);
                for r in 0..rows {
                    let gr = g[r];
                    if gr != 0.0 {
                        for (dst, wc) in gx.iter_mut().zip(&data[r * cols..(r + 1) * cols]) {
                            *dst += gr * wc;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                add_into(self.slot(*a, adj, grads), g);
                add_into(self.slot(*b, adj, grads), g);
            }
            Op::Sub(a, b) => {
                add_into(self.slot(*a, adj, grads), g);
                for (dst, x) in self.slot(*b, adj, grads).iter_mut().zip(g) {
                    *dst -= x;
                }
            }
            Op::Mul(a, b) => {
                if a == b {
                    let av = self.value(*a).to_vec();
                    for ((dst, x), gi) in self.slot(*a, adj, grads).iter_mut().zip(&av).zip(g) {
                        *dst += 2.0 * gi * x;
                    }
                } else {
                    let bv = self.value(*b);
                    for ((dst, y), gi) in self.slot(*a, adj, grads).iter_mut().zip(bv).zip(g) {
                        *dst += gi * y;
                    }
                    let av = self.value(*a);
                    for ((dst, x), gi) in self.slot(*b, adj, grads).iter_mut().zip(av).zip(g) {
                        *dst += gi * x;
                    }
                }
            }
            Op::Scale(a, f) => {
                for (dst, gi) in self.slot(*a, adj, grads).iter_mut().zip(g) {
                    *dst += f * gi;
                }
            }
            Op::Mask(a, m) => {
                for ((dst, gi), mi) in self.slot(*a, adj, grads).iter_mut().zip(g).zip(m) {
                    *dst += gi * mi;
                }
            }
            Op::Tanh(a) => {
                let y = &node.value;
                for ((dst, gi), yi) in self.slot(*a, adj, grads).iter_mut().zip(g).zip(y) {
                    *dst += gi * (1.0 - yi * yi);
                }
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                for ((dst, gi), yi) in self.slot(*a, adj, grads).iter_mut().zip(g).zip(y) {
                    *dst += gi * yi * (1.0 - yi);
                }
            }
            Op::Log(a) => {
                let xv = self.value(*a);
                for ((dst, gi), xi) in self.slot(*a, adj, grads).iter_mut().zip(g).zip(xv) {
                    if *xi > LOG_CLAMP {
                        *dst += gi / xi;
                    }
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.dim(*p);
                    add_into(self.slot(*p, adj, grads), &g[offset..offset + len]);
                    offset += len;
                }
            }
            Op::Slice { x, start } => {
                let s = self.slot(*x, adj, grads);
                add_into(&mut s[*start..*start + g.len()], g);
            }
            Op::Dot(a, b) => {
                let g0 = g[0];
                if a == b {
                    let av = self.value(*a).to_vec();
                    for (dst, x) in self.slot(*a, adj, grads).iter_mut().zip(&av) {
                        *dst += 2.0 * g0 * x;
                    }
                } else {
                    let bv = self.value(*b);
                    for (dst, y) in self.slot(*a, adj, grads).iter_mut().zip(bv) {
                        *dst += g0 * y;
                    }
                    let av = self.value(*a);
                    for (dst, x) in self.slot(*b, adj, grads).iter_mut().zip(av) {
                        *dst += g0 * x;
                    }
                }
            }
            Op::Sum(a) => {
                let g0 = g[0];
                for dst in self.slot(*a, adj, grads).iter_mut() {
                    *dst += g0;
                }
            }
            Op::Dots { keys, query } => {
                let qv = self.value(*query);
                for (k, gi) in keys.iter().zip(g) {
                    for (dst, q) in self.slot(*k, adj, grads).iter_mut().zip(qv) {
                        *dst += gi * q;
                    }
                }
                for (k, gi) in keys.iter().zip(g) {
                    let kv = self.value(*k);
                    for (dst, x) in self.slot(*query, adj, grads).iter_mut().zip(kv) {
                        *dst += gi * x;
                    }
                }
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let inner: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                for ((dst, gi), yi) in self.slot(*a, adj, grads).iter_mut().zip(g).zip(y) {
                    *dst += yi * (gi - inner);
                }
            }
            Op::LogSoftmax(a) => {
                let y = &node.value;
                let total: f64 = g.iter().sum();
                for ((dst, gi), yi) in self.slot(*a, adj, grads).iter_mut().zip(g).zip(y) {
                    *dst += gi - yi.exp() * total;
                }
            }
            Op::WeightedSum { weights, items } => {
                let wv = self.value(*weights);
                for (w, item) in wv.iter().zip(items) {
                    for (dst, gi) in self.slot(*item, adj, grads).iter_mut().zip(g) {
                        *dst += w * gi;
                    }
                }
                let dw: Vec<f64> = items
                    .iter()
                    .map(|item| self.value(*item).iter().zip(g).map(|(x, gi)| x * gi).sum())
                    .collect();
                add_into(self.slot(*weights, adj, grads), &dw);
            }
            Op::Gather { x, idx } => {
                let s = self.slot(*x, adj, grads);
                for (&j, gi) in idx.iter().zip(g) {
                    s[j] += gi;
                }
            }
            Op::Entropy(p) => {
                let g0 = g[0];
                let pv = self.value(*p).to_vec();
                for (dst, pi) in self.slot(*p, adj, grads).iter_mut().zip(&pv) {
                    *dst -= g0 * (pi.max(LOG_CLAMP).ln() + if *pi > LOG_CLAMP { 1.0 } else { 0.0 });
                }
            }
        }
    }

    /// Mutable adjoint storage for `v`: the parameter's gradient buffer for
    /// whole-parameter nodes, otherwise the node's own adjoint.
    fn slot<'a>(&self, v: Var, adj: &'a mut [Vec<f64>], grads: &'a mut Gradients) -> &'a mut [f64] {
        if let Op::Param(id) = self.nodes[v.0].op {
            return grads.get_mut(id);
        }
        let a = &mut adj[v.0];
        if a.is_empty() {
            *a = vec![0.0; self.nodes[v.0].value.len()];
        }
        a
    }
}

/// Adjoints produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Adjoints {
    adj: Vec<Vec<f64>>,
}

impl Adjoints {
    /// Gradient of the loss with respect to `v`; `None` if the loss does not
    /// depend on it (or `v` is a whole-parameter node).
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.adj.get(v.0).filter(|a| !a.is_empty()).map(|a| a.as_slice())
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

pub(crate) fn entropy(p: &[f64]) -> f64 {
    -p.iter().map(|pi| pi * pi.max(LOG_CLAMP).ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn single(params: &mut ParamSet, name: &str, shape: Vec<usize>, data: Vec<f64>) -> ParamId {
        params.add(name, Tensor::new(shape, data).unwrap()).unwrap()
    }

    #[test]
    fn sum_of_parameter_has_unit_gradient() {
        let mut params = ParamSet::new();
        let w = single(&mut params, "w", vec![2, 3], vec![0.5; 6]);
        let mut g = Graph::new(&params);
        let wv = g.param(w);
        let loss = g.sum(wv);
        let mut grads = Gradients::zeros_like(&params);
        g.backward(loss, &mut grads).unwrap();
        assert_eq!(grads.get(w), &[1.0; 6]);
    }

    #[test]
    fn quadratic_form_gradient_is_outer_product() {
        // loss = xᵀ W x, so dloss/dW = x xᵀ.
        let mut params = ParamSet::new();
        let w = single(&mut params, "w", vec![3, 3], vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, 0.9]);
        let x = [1.5, -2.0, 0.25];
        let mut g = Graph::new(&params);
        let xv = g.input(x.to_vec());
        let wx = g.matvec(w, xv);
        let loss = g.dot(xv, wx);
        let mut grads = Gradients::zeros_like(&params);
        g.backward(loss, &mut grads).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let expected = x[r] * x[c];
                assert!((grads.get(w)[r * 3 + c] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let params = ParamSet::new();
        let mut g = Graph::new(&params);
        let x = g.input(vec![1.0, 2.0]);
        let mut grads = Gradients::zeros_like(&params);
        assert!(matches!(g.backward(x, &mut grads), Err(AutodiffError::NotScalar(2))));
    }

    #[test]
    fn gradients_accumulate_across_graphs() {
        let mut params = ParamSet::new();
        let w = single(&mut params, "w", vec![2], vec![1.0, 2.0]);
        let mut grads = Gradients::zeros_like(&params);
        for _ in 0..3 {
            let mut g = Graph::new(&params);
            let wv = g.param(w);
            let loss = g.sum(wv);
            g.backward(loss, &mut grads).unwrap();
        }
        assert_eq!(grads.get(w), &[3.0, 3.0]);
    }

    #[test]
    fn self_products_double_count() {
        let params = ParamSet::new();
        let mut g = Graph::new(&params);
        let x = g.input(vec![3.0]);
        let y = g.mul(x, x);
        let loss = g.sum(y);
        let mut grads = Gradients::zeros_like(&params);
        let adj = g.backward(loss, &mut grads).unwrap();
        assert_eq!(adj.get(x).unwrap(), &[6.0]);
    }

    #[test]
    fn softmax_is_shift_invariant_and_stable() {
        let p = softmax(&[1000.0, 1001.0]);
        let q = softmax(&[0.0, 1.0]);
        assert!((p[0] - q[0]).abs() < 1e-15);
        assert!(p.iter().all(|v| v.is_finite()));
    }
}
