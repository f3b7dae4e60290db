//! Detectors: preprocessing, the LMMSE reference, and the neural detectors
//! (CycleGAN and its DNN / CycleDNN baselines).

mod ensemble;
mod losses;
mod preprocess;
mod train;

use num_complex::Complex64;

pub use ensemble::{read_ensemble, write_ensemble, DetectorEnsemble, DetectorKind, NetworkLayout};
pub use losses::{
    d_loss, d_loss_from_outputs, g_loss_nets, l1_mean, mean_square, targets, LossWeights, FAKE_TARGET, REAL_TARGET,
};
pub use preprocess::{augment, denormalize, fit_scales, flatten, normalize, unflatten, PreprocScales, ScaleMode};
pub use train::{
    detect, discriminator_step, pseudo_label, train_baseline, train_block, train_semisupervised, train_supervised,
    validation_metrics, BlockReport, Dataset, PilotPair, PilotSets, StopReason, TrainConfig, TrainReport,
};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::link::ComplexFrame;

/// Per-stream LMMSE after the receive rotation `U^H`:
/// `ŝ_i = σ_i·Es / (σ_i²·Es + σ²) · (U^H Y)_i`.
pub fn lmmse_detect(
    y_d: &ComplexFrame,
    ch: &ChannelRealization,
    streams: usize,
    noise_variance: f64,
    symbol_energy: f64,
) -> Result<ComplexFrame> {
    if y_d.rows() != ch.n_rx() {
        return Err(Error::Dimension {
            op: "lmmse",
            left: (y_d.rows(), y_d.symbols()),
            right: (ch.n_rx(), y_d.symbols()),
        });
    }
    if streams > ch.svd.sigma.len() {
        return Err(Error::Domain(format!("{streams} streams exceed channel rank bound")));
    }
    let rotated = ch.svd.u.columns(0, streams).adjoint() * y_d.samples();
    let mut out = rotated;
    for i in 0..streams {
        let sigma = ch.svd.sigma[i];
        let denom = sigma * sigma * symbol_energy + noise_variance;
        let gain = if denom > 0.0 { sigma * symbol_energy / denom } else { 0.0 };
        for v in out.row_mut(i).iter_mut() {
            *v *= Complex64::new(gain, 0.0);
        }
    }
    Ok(ComplexFrame::new(out))
}
