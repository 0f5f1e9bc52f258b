use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};
use super::ModelError;

/// An update rule applied to every tensor of a [`ParamStore`].
pub trait StepRule {
    fn step(&mut self, params: &mut ParamStore, grads: &Gradients, lr: f64);
}

/// Plain gradient descent: `w ← w − lr·g`.
#[derive(Clone, Debug, Default)]
pub struct Sgd;

impl StepRule for Sgd {
    fn step(&mut self, params: &mut ParamStore, grads: &Gradients, lr: f64) {
        for (i, g) in grads.tensors.iter().enumerate() {
            params.tensor_mut(i).add_scaled(g, -lr);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub config: AdamWConfig,
    first: Option<Gradients>,
    second: Option<Gradients>,
    steps: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig) -> Self {
        Self {
            config,
            first: None,
            second: None,
            steps: 0,
        }
    }
}

impl StepRule for AdamW {
    fn step(&mut self, params: &mut ParamStore, grads: &Gradients, lr: f64) {
        let cfg = self.config;
        let m = self.first.get_or_insert_with(|| params.zeros_like());
        let v = self.second.get_or_insert_with(|| params.zeros_like());
        self.steps += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.steps as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.steps as i32);
        for (i, g) in grads.tensors.iter().enumerate() {
            let w = params.tensor_mut(i);
            let mi = &mut m.tensors[i];
            let vi = &mut v.tensors[i];
            for k in 0..g.data.len() {
                let gk = g.data[k];
                mi.data[k] = cfg.beta1 * mi.data[k] + (1.0 - cfg.beta1) * gk;
                vi.data[k] = cfg.beta2 * vi.data[k] + (1.0 - cfg.beta2) * gk * gk;
                let m_hat = mi.data[k] / bc1;
                let v_hat = vi.data[k] / bc2;
                w.data[k] -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * w.data[k]);
            }
        }
    }
}

/// Checks that `grads` lines up with `params`, then applies `rule`.
pub fn apply_gradient(
    params: &mut ParamStore,
    grads: &Gradients,
    rule: &mut dyn StepRule,
    lr: f64,
) -> Result<(), ModelError> {
    if grads.tensors.len() != params.len() {
        return Err(ModelError::ShapeMismatch {
            expected: params.len(),
            found: grads.tensors.len(),
        });
    }
    for (i, g) in grads.tensors.iter().enumerate() {
        let p = params.tensor(i);
        if p.shape() != g.shape() {
            return Err(ModelError::ShapeMismatch {
                expected: p.len(),
                found: g.len(),
            });
        }
    }
    rule.step(params, grads, lr);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tensor::Matrix;

    fn one_param(w: f64) -> ParamStore {
        let mut p = ParamStore::default();
        p.push("w", Matrix::from_vec(1, 1, vec![w]));
        p
    }

    #[test]
    fn zero_gradient_leaves_weights_unchanged() {
        let mut p = one_param(0.75);
        let g = p.zeros_like();
        apply_gradient(&mut p, &g, &mut Sgd, 0.1).unwrap();
        assert_eq!(p.tensor(0).data[0], 0.75);
        let mut adam = AdamW::new(AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        });
        apply_gradient(&mut p, &g, &mut adam, 0.1).unwrap();
        assert_eq!(p.tensor(0).data[0], 0.75);
    }

    #[test]
    fn sgd_on_quadratic_matches_closed_form() {
        // L(w) = (w - 3)^2, dL/dw = 2(w - 3); at w = 1 the gradient is -4.
        let mut p = one_param(1.0);
        let g = Gradients {
            tensors: vec![Matrix::from_vec(1, 1, vec![2.0 * (1.0 - 3.0)])],
        };
        apply_gradient(&mut p, &g, &mut Sgd, 0.1).unwrap();
        assert!((p.tensor(0).data[0] - (1.0 - 0.1 * -4.0)).abs() < 1e-15);
    }

    #[test]
    fn identical_updates_are_identical() {
        let g = Gradients {
            tensors: vec![Matrix::from_vec(1, 1, vec![0.3])],
        };
        let run = || {
            let mut p = one_param(0.5);
            let mut rule = AdamW::new(AdamWConfig::default());
            for _ in 0..5 {
                apply_gradient(&mut p, &g, &mut rule, 1e-2).unwrap();
            }
            p.tensor(0).data[0]
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = one_param(0.5);
        let g = Gradients {
            tensors: vec![Matrix::zeros(2, 1)],
        };
        assert!(matches!(
            apply_gradient(&mut p, &g, &mut Sgd, 0.1),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }
}
