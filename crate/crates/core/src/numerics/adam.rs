use serde::{Deserialize, Serialize};

use super::{NumericsError, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept per parameter in store order.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        Self {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) -> Result<(), NumericsError> {
        if grads.len() != params.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "adam_step",
                left: vec![params.len()],
                right: vec![grads.len()],
            });
        }
        for (id, g) in params.ids().zip(grads) {
            if params.get(id).shape() != g.shape() {
                return Err(NumericsError::ShapeMismatch {
                    op: "adam_step",
                    left: params.get(id).shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (i, id) in params.ids().enumerate() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.get_mut(id).data_mut();
            for k in 0..p.len() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.0]]));
        s.insert("b", Tensor::row_vector(&[0.25]));
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store();
        let before = s.clone();
        let mut adam = Adam::new(AdamConfig::default(), &s);
        let zeros = s.zeros_like();
        adam.step(&mut s, &zeros).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = 1, v̂ = 1 ⇒ Δ = −lr · 1/(1 + 1e-8)
        let mut s = store();
        let before = s.clone();
        let grads: Vec<Tensor> = s.iter().map(|(_, _, t)| Tensor::filled(t.shape(), 1.0)).collect();
        let mut adam = Adam::new(AdamConfig::default(), &s);
        adam.step(&mut s, &grads).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        for id in s.ids() {
            for (a, b) in s.get(id).data().iter().zip(before.get(id).data()) {
                assert!(((a - b) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_steps_are_deterministic() {
        let grads: Vec<Tensor> = store()
            .iter()
            .map(|(_, _, t)| t.map(|x| x * 0.3 - 0.1))
            .collect();
        let run = || {
            let mut s = store();
            let mut adam = Adam::new(AdamConfig::default(), &s);
            adam.step(&mut s, &grads).unwrap();
            adam.step(&mut s, &grads).unwrap();
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut s = store();
        let mut adam = Adam::new(AdamConfig::default(), &s);
        let bad = vec![Tensor::zeros(&[2, 2]), Tensor::zeros(&[1, 2])];
        assert!(adam.step(&mut s, &bad).is_err());
        assert_eq!(adam.steps_taken(), 0);
    }
}
