use rand::Rng;
use serde::{Deserialize, Serialize};

use super::param::{glorot_uniform, ParamId, ParamStore};
use super::{Graph, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softmax,
    Identity,
}

/// Fully connected layer `activation(W·x + b)`.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub weights: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    input_size: usize,
    output_size: usize,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        output_size: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let weights = store.add(
            &format!("{name}.w"),
            glorot_uniform(rng, output_size, input_size),
        );
        let bias = store.add(&format!("{name}.b"), Tensor::zeros(&[output_size]));
        DenseLayer {
            weights,
            bias,
            activation,
            input_size,
            output_size,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        if g.value(x).len() != self.input_size {
            return Err(Error::Dimension(format!(
                "dense layer expects {} inputs, got {}",
                self.input_size,
                g.value(x).len()
            )));
        }
        let z = g.affine(self.weights, Some(self.bias), x)?;
        Ok(match self.activation {
            Activation::Tanh => g.tanh(z),
            Activation::Softmax => g.softmax(z),
            Activation::Identity => z,
        })
    }
}

/// LSTM cell with a forget gate and no peepholes.
///
/// One affine map over `[x; h_prev]` produces the pre-activations of the
/// input, forget, output and candidate gates, stacked in that order:
///
/// ```text
/// i = σ(W_i·[x;h] + b_i)     f = σ(W_f·[x;h] + b_f)
/// o = σ(W_o·[x;h] + b_o)     g = tanh(W_g·[x;h] + b_g)
/// c = f⊙c_prev + i⊙g         h = o⊙tanh(c)
/// ```
#[derive(Clone, Copy, Debug)]
pub struct LstmCell {
    pub weights: ParamId,
    pub bias: ParamId,
    input_size: usize,
    hidden_size: usize,
}

impl LstmCell {
    /// Glorot-uniform weights, zero biases except the forget gate at 1.0.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut R,
    ) -> Self {
        assert!(input_size > 0 && hidden_size > 0);
        let weights = store.add(
            &format!("{name}.w"),
            glorot_uniform(rng, 4 * hidden_size, input_size + hidden_size),
        );
        let mut b = Tensor::zeros(&[4 * hidden_size]);
        b.data_mut()[hidden_size..2 * hidden_size]
            .iter_mut()
            .for_each(|v| *v = 1.0);
        let bias = store.add(&format!("{name}.b"), b);
        LstmCell {
            weights,
            bias,
            input_size,
            hidden_size,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn zero_state(&self, g: &mut Graph) -> (Var, Var) {
        let h = g.input(vec![0.0; self.hidden_size]);
        let c = g.input(vec![0.0; self.hidden_size]);
        (h, c)
    }

    /// One recurrence step, returning `(h, c)`.
    pub fn step(&self, g: &mut Graph, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        let hs = self.hidden_size;
        if g.value(x).len() != self.input_size
            || g.value(h_prev).len() != hs
            || g.value(c_prev).len() != hs
        {
            return Err(Error::Dimension(format!(
                "lstm step expects input {} and state {hs}, got {}, {}, {}",
                self.input_size,
                g.value(x).len(),
                g.value(h_prev).len(),
                g.value(c_prev).len()
            )));
        }
        let xh = g.concat(&[x, h_prev]);
        let z = g.affine(self.weights, Some(self.bias), xh)?;
        let zi = g.slice(z, 0, hs)?;
        let zf = g.slice(z, hs, hs)?;
        let zo = g.slice(z, 2 * hs, hs)?;
        let zg = g.slice(z, 3 * hs, hs)?;
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let o = g.sigmoid(zo);
        let cand = g.tanh(zg);
        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok((h, c))
    }

    /// Hidden states after each element of `xs`.
    pub fn run(&self, g: &mut Graph, xs: &[Var]) -> Result<Vec<Var>> {
        let (mut h, mut c) = self.zero_state(g);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            let (nh, nc) = self.step(g, x, h, c)?;
            h = nh;
            c = nc;
            out.push(h);
        }
        Ok(out)
    }
}

/// Two LSTMs, one reading left to right and one right to left, with their
/// states concatenated per position.
#[derive(Clone, Copy, Debug)]
pub struct BiEncoder {
    pub forward_cell: LstmCell,
    pub reverse_cell: LstmCell,
}

impl BiEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut R,
    ) -> Self {
        BiEncoder {
            forward_cell: LstmCell::new(
                store,
                &format!("{name}.forward"),
                input_size,
                hidden_size,
                rng,
            ),
            reverse_cell: LstmCell::new(
                store,
                &format!("{name}.reverse"),
                input_size,
                hidden_size,
                rng,
            ),
        }
    }

    pub fn input_size(&self) -> usize {
        self.forward_cell.input_size()
    }

    pub fn output_size(&self) -> usize {
        self.forward_cell.hidden_size() + self.reverse_cell.hidden_size()
    }

    /// Forward states and reverse states, both indexed by input position.
    pub fn directional_states(&self, g: &mut Graph, xs: &[Var]) -> Result<(Vec<Var>, Vec<Var>)> {
        if xs.is_empty() {
            return Err(Error::InvalidInput(
                "cannot encode an empty sequence".into(),
            ));
        }
        let fwd = self.forward_cell.run(g, xs)?;
        let reversed: Vec<Var> = xs.iter().rev().copied().collect();
        let mut rev = self.reverse_cell.run(g, &reversed)?;
        rev.reverse();
        Ok((fwd, rev))
    }

    pub fn encode(&self, g: &mut Graph, xs: &[Var]) -> Result<Vec<Var>> {
        let (fwd, rev) = self.directional_states(g, xs)?;
        Ok(fwd
            .into_iter()
            .zip(rev)
            .map(|(f, r)| g.concat(&[f, r]))
            .collect())
    }
}
