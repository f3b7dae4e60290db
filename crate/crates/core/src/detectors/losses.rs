//! Least-squares adversarial and ℓ1 consistency losses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{NeuralNet, RealMatrix};

pub const REAL_TARGET: f64 = 1.0;
pub const FAKE_TARGET: f64 = -1.0;

/// Weights of the four ℓ1 terms of the generator objective:
/// `α‖G_s2y(s)−y‖ + β‖G_y2s(y)−s‖ + γ‖G_y2s(G_s2y(s))−s‖ + δ‖G_s2y(G_y2s(y))−y‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl LossWeights {
    pub fn uniform(w: f64) -> Self {
        Self {
            alpha: w,
            beta: w,
            gamma: w,
            delta: w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma), ("delta", self.delta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("loss weight must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.gamma, self.delta]
    }
}

/// `(t_real, t_fake)`, swapped when the labels are inverted.
pub fn targets(inverted: bool) -> (f64, f64) {
    if inverted {
        (FAKE_TARGET, REAL_TARGET)
    } else {
        (REAL_TARGET, FAKE_TARGET)
    }
}

/// `mean (D_real − t_r)² + mean (D_fake − t_f)²` from discriminator outputs.
pub fn d_loss_from_outputs(real: &RealMatrix, fake: &RealMatrix, inverted: bool) -> f64 {
    let (tr, tf) = targets(inverted);
    let mean_sq = |m: &RealMatrix, t: f64| {
        if m.rows() == 0 {
            0.0
        } else {
            m.data().iter().map(|v| (v - t).powi(2)).sum::<f64>() / m.rows() as f64
        }
    };
    mean_sq(real, tr) + mean_sq(fake, tf)
}

/// Discriminator loss on real and fake 32-wide pairs, evaluated in eval mode.
pub fn d_loss(d: &NeuralNet, real: &RealMatrix, fake: &RealMatrix, inverted: bool) -> Result<f64> {
    Ok(d_loss_from_outputs(&d.predict(real)?, &d.predict(fake)?, inverted))
}

/// Mean over rows of the row-wise ℓ1 distance.
pub fn l1_mean(a: &RealMatrix, b: &RealMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    if a.rows() == 0 {
        return 0.0;
    }
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.rows() as f64
}

/// Mean over rows of the squared scalar outputs.
pub fn mean_square(a: &RealMatrix) -> f64 {
    if a.rows() == 0 {
        return 0.0;
    }
    a.data().iter().map(|v| v * v).sum::<f64>() / a.rows() as f64
}

/// Generator objective in eval mode. Discriminator terms are skipped when
/// the corresponding network is absent (the CycleDNN and DNN baselines).
pub fn g_loss_nets(
    g_s2y: &NeuralNet,
    g_y2s: &NeuralNet,
    d_s2y: Option<&NeuralNet>,
    d_y2s: Option<&NeuralNet>,
    s: &RealMatrix,
    y: &RealMatrix,
    w: &LossWeights,
) -> Result<f64> {
    let y_hat = g_s2y.predict(s)?;
    let s_hat = g_y2s.predict(y)?;
    let mut loss = 0.0;
    if let Some(d) = d_s2y {
        loss += mean_square(&d.predict(&s.hstack(&y_hat)?)?);
    }
    if let Some(d) = d_y2s {
        loss += mean_square(&d.predict(&y.hstack(&s_hat)?)?);
    }
    loss += w.alpha * l1_mean(&y_hat, y);
    loss += w.beta * l1_mean(&s_hat, s);
    if w.gamma != 0.0 {
        loss += w.gamma * l1_mean(&g_y2s.predict(&y_hat)?, s);
    }
    if w.delta != 0.0 {
        loss += w.delta * l1_mean(&g_s2y.predict(&s_hat)?, y);
    }
    Ok(loss)
}
