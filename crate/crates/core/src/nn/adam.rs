use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::{Error, Result};

/// Adam with bias-corrected moment estimates.
///
/// Parameters that received no gradient since the previous step are left
/// untouched, as are rows of row-sparse tables that were not looked up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Adam {
    /// Applies one update to every parameter holding gradient, then resets
    /// all gradients. Fails without touching any value if a gradient is
    /// NaN or infinite.
    pub fn step(&self, store: &mut ParamStore) -> Result<()> {
        let bad = store
            .iter()
            .find(|(_, p)| p.has_gradient() && !p.gradient.is_finite())
            .map(|(_, p)| p.name().to_owned());
        if let Some(name) = bad {
            store.zero_gradients();
            return Err(Error::NonFiniteGradient(name));
        }

        for p in store.iter_mut() {
            if !p.has_gradient() {
                continue;
            }
            p.step_count += 1;
            let t = p.step_count as i32;
            let c1 = 1.0 - self.beta1.powi(t);
            let c2 = 1.0 - self.beta2.powi(t);
            let cols = p.value.cols();
            let ranges: Vec<(usize, usize)> = if p.is_row_sparse() {
                p.touched_rows()
                    .map(|r| (r * cols, (r + 1) * cols))
                    .collect()
            } else {
                vec![(0, p.value.len())]
            };
            for (start, end) in ranges {
                for k in start..end {
                    let g = p.gradient.data()[k];
                    let m = self.beta1 * p.adam_m.data()[k] + (1.0 - self.beta1) * g;
                    let v = self.beta2 * p.adam_v.data()[k] + (1.0 - self.beta2) * g * g;
                    p.adam_m.data_mut()[k] = m;
                    p.adam_v.data_mut()[k] = v;
                    let m_hat = m / c1;
                    let v_hat = v / c2;
                    p.value.data_mut()[k] -=
                        self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            }
            p.zero_gradient();
        }
        Ok(())
    }
}
