//! Reverse-mode differentiation over a per-sentence tape of vector nodes.
//!
//! A [`Graph`] reads parameter values from a borrowed [`ParamStore`] while
//! recording the forward computation. [`Graph::backward`] walks the tape in
//! reverse and returns [`Gradients`], which the caller then folds into the
//! store with [`ParamStore::accumulate`].

use super::{Gradients, ParamId, ParamStore};
use crate::{Error, Result};

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    Row(ParamId, usize),
    Affine {
        w: ParamId,
        b: Option<ParamId>,
        x: Var,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Scale(Var, f64),
    Sum(Vec<Var>),
    Mse(Var, Var),
    Mae(Var, Var),
    Margin(Var, usize),
    Nll(Var, usize),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cosine similarity; zero when either vector has (near) zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    if na < 1e-12 || nb < 1e-12 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Index of the largest competitor to `gold`, lowest index on ties.
fn best_competitor(scores: &[f64], gold: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &s) in scores.iter().enumerate() {
        if k == gold {
            continue;
        }
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(k);
        }
    }
    best
}

pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Value of a scalar node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn same_len(&self, a: Var, b: Var, what: &str) -> Result<usize> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb {
            return Err(Error::Dimension(format!("{what}: lengths {la} and {lb}")));
        }
        Ok(la)
    }

    /// A constant; receives no gradient.
    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Input, value)
    }

    /// Copy of `x` that blocks gradient flow.
    pub fn detach(&mut self, x: Var) -> Var {
        let value = self.value(x).to_vec();
        self.input(value)
    }

    /// The whole parameter, flattened.
    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.get(id).value.data().to_vec();
        self.push(Op::Param(id), value)
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn row(&mut self, id: ParamId, row: usize) -> Result<Var> {
        let t = &self.store.get(id).value;
        if row >= t.rows() {
            return Err(Error::Dimension(format!(
                "row {row} out of range for `{}` with {} rows",
                self.store.get(id).name(),
                t.rows()
            )));
        }
        let value = t.row(row).to_vec();
        Ok(self.push(Op::Row(id, row), value))
    }

    /// `W·x + b`.
    pub fn affine(&mut self, w: ParamId, b: Option<ParamId>, x: Var) -> Result<Var> {
        let wt = &self.store.get(w).value;
        let (rows, cols) = (wt.rows(), wt.cols());
        let xv = self.value(x);
        if xv.len() != cols {
            return Err(Error::Dimension(format!(
                "`{}` expects input of length {cols}, got {}",
                self.store.get(w).name(),
                xv.len()
            )));
        }
        let mut out: Vec<f64> = match b {
            Some(b) => {
                let bv = self.store.get(b).value.data();
                if bv.len() != rows {
                    return Err(Error::Dimension(format!(
                        "bias `{}` has length {}, expected {rows}",
                        self.store.get(b).name(),
                        bv.len()
                    )));
                }
                bv.to_vec()
            }
            None => vec![0.0; rows],
        };
        let wd = wt.data();
        for (r, o) in out.iter_mut().enumerate() {
            let wr = &wd[r * cols..(r + 1) * cols];
            *o += wr.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(self.push(Op::Affine { w, b, x }, out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "add")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Op::Add(a, b), value))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "mul")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        self.push(Op::Sigmoid(x), value)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(Op::Tanh(x), value)
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let max = xv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xv.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let value = exps.into_iter().map(|e| e / z).collect();
        self.push(Op::Softmax(x), value)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut value = Vec::new();
        for &p in parts {
            value.extend_from_slice(self.value(p));
        }
        self.push(Op::Concat(parts.to_vec()), value)
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + len > xv.len() {
            return Err(Error::Dimension(format!(
                "slice {start}..{} of a length-{} vector",
                start + len,
                xv.len()
            )));
        }
        let value = xv[start..start + len].to_vec();
        Ok(self.push(Op::Slice(x, start), value))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x).iter().map(|v| v * factor).collect();
        self.push(Op::Scale(x, factor), value)
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let mut total = 0.0;
        for &t in terms {
            let v = self.value(t);
            if v.len() != 1 {
                return Err(Error::Dimension(format!(
                    "sum expects scalars, got length {}",
                    v.len()
                )));
            }
            total += v[0];
        }
        Ok(self.push(Op::Sum(terms.to_vec()), vec![total]))
    }

    /// Mean of terms; the caller guarantees `terms` is non-empty.
    pub fn mean(&mut self, terms: &[Var]) -> Result<Var> {
        let s = self.sum(terms)?;
        Ok(self.scale(s, 1.0 / terms.len() as f64))
    }

    /// Mean squared error. Differentiable in both arguments; detach the
    /// target first to treat it as a constant.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let n = self.same_len(pred, target, "mse")?;
        if n == 0 {
            return Err(Error::InvalidInput("mse of empty vectors".into()));
        }
        let s: f64 = self
            .value(pred)
            .iter()
            .zip(self.value(target))
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        Ok(self.push(Op::Mse(pred, target), vec![s / n as f64]))
    }

    /// Mean absolute error.
    pub fn mae(&mut self, pred: Var, target: Var) -> Result<Var> {
        let n = self.same_len(pred, target, "mae")?;
        if n == 0 {
            return Err(Error::InvalidInput("mae of empty vectors".into()));
        }
        let s: f64 = self
            .value(pred)
            .iter()
            .zip(self.value(target))
            .map(|(p, t)| (p - t).abs())
            .sum();
        Ok(self.push(Op::Mae(pred, target), vec![s / n as f64]))
    }

    /// Hinge loss `max(0, 1 - s[gold] + max_{k != gold} s[k])`.
    pub fn margin(&mut self, scores: Var, gold: usize) -> Result<Var> {
        let sv = self.value(scores);
        if gold >= sv.len() {
            return Err(Error::InvalidInput(format!(
                "gold index {gold} out of range for {} scores",
                sv.len()
            )));
        }
        let loss = match best_competitor(sv, gold) {
            Some(k) => (1.0 - sv[gold] + sv[k]).max(0.0),
            None => 0.0,
        };
        Ok(self.push(Op::Margin(scores, gold), vec![loss]))
    }

    /// Negative log-likelihood of `gold` under a probability vector.
    pub fn nll(&mut self, probs: Var, gold: usize) -> Result<Var> {
        let pv = self.value(probs);
        if gold >= pv.len() {
            return Err(Error::InvalidInput(format!(
                "gold index {gold} out of range for {} classes",
                pv.len()
            )));
        }
        let loss = -pv[gold].max(f64::MIN_POSITIVE).ln();
        Ok(self.push(Op::Nll(probs, gold), vec![loss]))
    }

    /// Back-propagates from the scalar `loss` and returns the gradient of
    /// every parameter that contributed to it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::Usage(
                "backward called without a forward pass".into(),
            ));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::Usage("loss node is not on this tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got length {}",
                self.value(loss).len()
            )));
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let g = out.dense_mut(*id, dy.len());
                    g.iter_mut().zip(&dy).for_each(|(a, d)| *a += d);
                }
                Op::Row(id, r) => {
                    let g = out.row_mut(*id, *r, dy.len());
                    g.iter_mut().zip(&dy).for_each(|(a, d)| *a += d);
                }
                Op::Affine { w, b, x } => {
                    let wt = &self.store.get(*w).value;
                    let cols = wt.cols();
                    let xv = self.value(*x);
                    {
                        let gw = out.dense_mut(*w, wt.len());
                        for (r, d) in dy.iter().enumerate() {
                            if *d == 0.0 {
                                continue;
                            }
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            row.iter_mut().zip(xv).for_each(|(a, x)| *a += d * x);
                        }
                    }
                    if let Some(b) = b {
                        let gb = out.dense_mut(*b, dy.len());
                        gb.iter_mut().zip(&dy).for_each(|(a, d)| *a += d);
                    }
                    let wd = wt.data();
                    let gx = acc(&mut grads, *x, cols);
                    for (r, d) in dy.iter().enumerate() {
                        if *d == 0.0 {
                            continue;
                        }
                        let row = &wd[r * cols..(r + 1) * cols];
                        gx.iter_mut().zip(row).for_each(|(a, w)| *a += d * w);
                    }
                }
                Op::Add(a, b) => {
                    for v in [a, b] {
                        let g = acc(&mut grads, *v, dy.len());
                        g.iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = acc(&mut grads, *a, dy.len());
                    for i in 0..dy.len() {
                        ga[i] += dy[i] * bv[i];
                    }
                    let gb = acc(&mut grads, *b, dy.len());
                    for i in 0..dy.len() {
                        gb[i] += dy[i] * av[i];
                    }
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    let g = acc(&mut grads, *x, dy.len());
                    for i in 0..dy.len() {
                        g[i] += dy[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    let g = acc(&mut grads, *x, dy.len());
                    for i in 0..dy.len() {
                        g[i] += dy[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let dot: f64 = dy.iter().zip(y).map(|(d, y)| d * y).sum();
                    let g = acc(&mut grads, *x, dy.len());
                    for i in 0..dy.len() {
                        g[i] += y[i] * (dy[i] - dot);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = self.value(*p).len();
                        let g = acc(&mut grads, *p, len);
                        g.iter_mut()
                            .zip(&dy[offset..offset + len])
                            .for_each(|(g, d)| *g += d);
                        offset += len;
                    }
                }
                Op::Slice(x, start) => {
                    let len = self.value(*x).len();
                    let g = acc(&mut grads, *x, len);
                    g[*start..*start + dy.len()]
                        .iter_mut()
                        .zip(&dy)
                        .for_each(|(g, d)| *g += d);
                }
                Op::Scale(x, f) => {
                    let g = acc(&mut grads, *x, dy.len());
                    g.iter_mut().zip(&dy).for_each(|(g, d)| *g += d * f);
                }
                Op::Sum(terms) => {
                    for t in terms {
                        acc(&mut grads, *t, 1)[0] += dy[0];
                    }
                }
                Op::Mse(p, t) => {
                    let (pv, tv) = (self.value(*p), self.value(*t));
                    let n = pv.len() as f64;
                    let diff: Vec<f64> = pv.iter().zip(tv).map(|(p, t)| p - t).collect();
                    let gp = acc(&mut grads, *p, diff.len());
                    for (g, d) in gp.iter_mut().zip(&diff) {
                        *g += dy[0] * 2.0 * d / n;
                    }
                    let gt = acc(&mut grads, *t, diff.len());
                    for (g, d) in gt.iter_mut().zip(&diff) {
                        *g -= dy[0] * 2.0 * d / n;
                    }
                }
                Op::Mae(p, t) => {
                    let (pv, tv) = (self.value(*p), self.value(*t));
                    let n = pv.len() as f64;
                    let sign: Vec<f64> = pv
                        .iter()
                        .zip(tv)
                        .map(|(p, t)| {
                            let d = p - t;
                            if d > 0.0 {
                                1.0
                            } else if d < 0.0 {
                                -1.0
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let gp = acc(&mut grads, *p, sign.len());
                    for (g, s) in gp.iter_mut().zip(&sign) {
                        *g += dy[0] * s / n;
                    }
                    let gt = acc(&mut grads, *t, sign.len());
                    for (g, s) in gt.iter_mut().zip(&sign) {
                        *g -= dy[0] * s / n;
                    }
                }
                Op::Margin(s, gold) => {
                    if node.value[0] > 0.0 {
                        let sv = self.value(*s);
                        if let Some(k) = best_competitor(sv, *gold) {
                            let g = acc(&mut grads, *s, sv.len());
                            g[*gold] -= dy[0];
                            g[k] += dy[0];
                        }
                    }
                }
                Op::Nll(p, gold) => {
                    let pv = self.value(*p);
                    let len = pv.len();
                    let pg = pv[*gold].max(f64::MIN_POSITIVE);
                    acc(&mut grads, *p, len)[*gold] -= dy[0] / pg;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;
    use approx::assert_relative_eq;

    #[test]
    fn cosine_examples() {
        assert_relative_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]), 1.0);
        assert_relative_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_relative_eq!(cosine_similarity(&[1.0, 2.0], &[2.0, 4.0]), 1.0);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 4.0]), 0.0);
    }

    #[test]
    fn mse_examples() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.input(vec![1.0, 0.0]);
        let z = g.input(vec![0.0, 0.0]);
        let l = g.mse(a, z).unwrap();
        assert_relative_eq!(g.scalar(l), 0.5);
        let p = g.input(vec![1.0, 2.0, 3.0]);
        let t = g.input(vec![1.0, 1.0, 1.0]);
        let l = g.mse(p, t).unwrap();
        assert_relative_eq!(g.scalar(l), 5.0 / 3.0);
        let l = g.mse(p, p).unwrap();
        assert_eq!(g.scalar(l), 0.0);
        assert!(matches!(g.mse(a, p), Err(Error::Dimension(_))));
    }

    #[test]
    fn margin_examples() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let s = g.input(vec![5.0, 0.0, 0.0]);
        let l = g.margin(s, 0).unwrap();
        assert_eq!(g.scalar(l), 0.0);
        let s = g.input(vec![0.0, 0.0]);
        let l = g.margin(s, 0).unwrap();
        assert_eq!(g.scalar(l), 1.0);
        let s = g.input(vec![0.2, 0.9, 0.1]);
        let l = g.margin(s, 0).unwrap();
        assert_relative_eq!(g.scalar(l), 1.7, epsilon = 1e-12);
        assert!(matches!(g.margin(s, 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn tanh_chain_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::new(vec![1, 1], vec![0.0]).unwrap());
        let mut g = Graph::new(&store);
        let x = g.input(vec![1.0]);
        let wx = g.affine(w, None, x).unwrap();
        let loss = g.tanh(wx);
        let grads = g.backward(loss).unwrap();
        assert_relative_eq!(grads.get(w, &store).unwrap().data()[0], 1.0);
    }

    #[test]
    fn zero_loss_gives_zero_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.3, -0.2]));
        let mut g = Graph::new(&store);
        let p = g.param(w);
        let l = g.mse(p, p).unwrap();
        let grads = g.backward(l).unwrap();
        assert!(grads
            .get(w, &store)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn backward_requires_forward() {
        let store = ParamStore::new();
        let g = Graph::new(&store);
        let mut other_store = ParamStore::new();
        other_store.add("x", Tensor::vector(vec![1.0]));
        let mut other = Graph::new(&other_store);
        let v = other.input(vec![1.0]);
        assert!(matches!(g.backward(v), Err(Error::Usage(_))));
    }

    #[test]
    fn non_participating_params_have_no_gradient() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::vector(vec![1.0, 2.0]));
        let b = store.add("b", Tensor::vector(vec![3.0, 4.0]));
        let mut g = Graph::new(&store);
        let av = g.param(a);
        let t = g.input(vec![0.0, 0.0]);
        let l = g.mse(av, t).unwrap();
        let grads = g.backward(l).unwrap();
        assert!(grads.get(b, &store).is_none());
        assert_eq!(grads.get(a, &store).unwrap().data(), &[1.0, 2.0]);
    }
}
