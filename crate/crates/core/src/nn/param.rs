use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::Tensor;
use crate::{Error, Result};

/// Handle into a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor with its accumulated gradient and Adam moments.
#[derive(Clone, Debug)]
pub struct Parameter {
    name: String,
    pub value: Tensor,
    pub gradient: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    pub step_count: u64,
    /// Embedding tables are updated row by row: only rows that received a
    /// gradient since the last optimizer step are touched.
    row_sparse: bool,
    touched_rows: BTreeSet<usize>,
    touched: bool,
}

impl Parameter {
    fn new(name: String, value: Tensor, row_sparse: bool) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            name,
            value,
            gradient: Tensor::zeros(&shape),
            adam_m: Tensor::zeros(&shape),
            adam_v: Tensor::zeros(&shape),
            step_count: 0,
            row_sparse,
            touched_rows: BTreeSet::new(),
            touched: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_row_sparse(&self) -> bool {
        self.row_sparse
    }

    /// Whether any gradient has been accumulated since the last reset.
    pub fn has_gradient(&self) -> bool {
        self.touched
    }

    /// Rows holding gradient, for row-sparse parameters.
    pub fn touched_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.touched_rows.iter().copied()
    }

    pub fn zero_gradient(&mut self) {
        if self.row_sparse {
            let rows: Vec<usize> = self.touched_rows.iter().copied().collect();
            for r in rows {
                self.gradient.row_mut(r).iter_mut().for_each(|g| *g = 0.0);
            }
        } else if self.touched {
            self.gradient.fill(0.0);
        }
        self.touched_rows.clear();
        self.touched = false;
    }
}

/// Gradients produced by one backward pass, not yet applied to the store.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    pub(crate) dense: BTreeMap<ParamId, Vec<f64>>,
    pub(crate) rows: BTreeMap<ParamId, BTreeMap<usize, Vec<f64>>>,
}

impl Gradients {
    pub(crate) fn dense_mut(&mut self, id: ParamId, len: usize) -> &mut Vec<f64> {
        self.dense.entry(id).or_insert_with(|| vec![0.0; len])
    }

    pub(crate) fn row_mut(&mut self, id: ParamId, row: usize, len: usize) -> &mut Vec<f64> {
        self.rows
            .entry(id)
            .or_default()
            .entry(row)
            .or_insert_with(|| vec![0.0; len])
    }

    /// Dense view of the gradient of one parameter, `None` if it did not
    /// participate in the loss.
    pub fn get(&self, id: ParamId, store: &ParamStore) -> Option<Tensor> {
        let dense = self.dense.get(&id);
        let rows = self.rows.get(&id);
        if dense.is_none() && rows.is_none() {
            return None;
        }
        let mut out = Tensor::zeros(store.get(id).value.shape());
        if let Some(d) = dense {
            out.data_mut().copy_from_slice(d);
        }
        if let Some(rows) = rows {
            for (&r, g) in rows {
                out.row_mut(r).iter_mut().zip(g).for_each(|(o, g)| *o += g);
            }
        }
        Some(out)
    }

    pub fn participating(&self) -> BTreeSet<ParamId> {
        self.dense.keys().chain(self.rows.keys()).copied().collect()
    }
}

/// Owns every trainable parameter of a model, addressed by id or by a
/// stable hierarchical name such as `context_encoder.forward.w`.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        self.insert(name, value, false)
    }

    /// Registers a table whose gradients arrive row by row (embeddings).
    pub fn add_row_sparse(&mut self, name: &str, value: Tensor) -> ParamId {
        self.insert(name, value, true)
    }

    fn insert(&mut self, name: &str, value: Tensor, row_sparse: bool) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name `{name}`"
        );
        let id = ParamId(self.params.len());
        self.params
            .push(Parameter::new(name.to_owned(), value, row_sparse));
        self.by_name.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Total number of scalar values.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Adds a backward pass's gradients to the accumulated gradients.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (&id, g) in &grads.dense {
            let p = &mut self.params[id.0];
            p.gradient
                .data_mut()
                .iter_mut()
                .zip(g)
                .for_each(|(a, g)| *a += g);
            p.touched = true;
            if p.row_sparse {
                p.touched_rows.extend(0..p.value.rows());
            }
        }
        for (&id, rows) in &grads.rows {
            let p = &mut self.params[id.0];
            for (&r, g) in rows {
                p.gradient
                    .row_mut(r)
                    .iter_mut()
                    .zip(g)
                    .for_each(|(a, g)| *a += g);
                if p.row_sparse {
                    p.touched_rows.insert(r);
                }
            }
            p.touched = true;
            if !p.row_sparse {
                // a dense parameter read row-wise still updates as a whole
                p.touched_rows.clear();
            }
        }
    }

    pub fn zero_gradients(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_gradient);
    }

    /// Copies parameter values (not optimizer state) from another store with
    /// the same layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.params.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "parameter count {} vs {}",
                self.params.len(),
                other.params.len()
            )));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if dst.value.shape() != src.value.shape() || dst.name != src.name {
                return Err(Error::Dimension(format!(
                    "parameter `{}` does not match `{}`",
                    dst.name, src.name
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }
}

/// Glorot/Xavier uniform initialization for a `rows × cols` weight matrix.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rng, &[rows, cols], limit)
}

/// Values drawn uniformly from `[-limit, limit]`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], limit: f64) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.data_mut()
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(-limit..=limit));
    t
}
