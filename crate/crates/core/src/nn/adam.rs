//! Bias-corrected Adam with L2 gradient augmentation.

use serde::{Deserialize, Serialize};

use super::net::NeuralNet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Added to every gradient as `l2_coeff * param` before the moment update.
    pub l2_coeff: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0002,
            beta1: 0.5,
            beta2: 0.99,
            epsilon: 1e-8,
            l2_coeff: 1e-4,
        }
    }
}

/// Per-parameter moment accumulators, laid out like the network's dense
/// layers (weights row-major, then biases).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &NeuralNet, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = net
            .dense_layers()
            .map(|p| p.weight.data().len() + p.bias.len())
            .collect();
        Self {
            config,
            step_count: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Applies one update to `net` from its accumulated gradients, then
    /// clears them.
    pub fn step(&mut self, net: &mut NeuralNet) {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            l2_coeff,
        } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        assert_eq!(
            self.first_moment.len(),
            net.dense_layers().count(),
            "adam state does not match network"
        );
        for ((p, m), v) in net
            .dense_layers_mut()
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            let nw = p.weight.data().len();
            assert_eq!(m.len(), nw + p.bias.len(), "adam state does not match network");
            let (mw, mb) = m.split_at_mut(nw);
            let (vw, vb) = v.split_at_mut(nw);
            let params = p.weight.data_mut().iter_mut().chain(p.bias.iter_mut());
            let grads = p.grad_weight.data_mut().iter_mut().chain(p.grad_bias.iter_mut());
            let ms = mw.iter_mut().chain(mb.iter_mut());
            let vs = vw.iter_mut().chain(vb.iter_mut());
            for (((w, g), m), v) in params.zip(grads).zip(ms).zip(vs) {
                let grad = *g + l2_coeff * *w;
                *m = beta1 * *m + (1.0 - beta1) * grad;
                *v = beta2 * *v + (1.0 - beta2) * grad * grad;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                *g = 0.0;
            }
        }
    }
}
