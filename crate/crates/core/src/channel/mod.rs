//! Block-fading MIMO channel generation.
//!
//! Every (rx, tx) path runs its own Jakes process with a random start time
//! and random phases; block `l` samples all paths at `t0 + l·T_block`. The
//! Rician variant mixes a fixed rank-one line-of-sight matrix into the
//! Rayleigh output.

mod jakes;
mod svd;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use jakes::{jakes_sample, JakesParams};
pub use svd::Svd;

use crate::error::{Error, Result};

/// Complex matrix used for channels, precoders and signal frames.
pub type CMatrix = DMatrix<Complex64>;

/// Settings shared by the Rayleigh and Rician generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub n_rx: usize,
    pub n_tx: usize,
    pub blocks: usize,
    pub max_doppler_hz: f64,
    /// Oscillators per path (`N0`).
    pub oscillators: usize,
    /// Time between successive block instants.
    pub block_period_s: f64,
}

impl ChannelConfig {
    /// Block period for `k` symbols per block at the given symbol rate.
    pub fn block_period(symbols_per_block: usize, symbol_rate_hz: f64) -> f64 {
        symbols_per_block as f64 / symbol_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub doppler_hz: f64,
    /// Linear Rician factor; 0 for Rayleigh.
    pub rician_factor: f64,
    pub seed: u64,
}

/// One block's channel matrix with its SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `[n_rx × n_tx]`
    pub h: CMatrix,
    pub svd: Svd,
    pub block_index: usize,
    pub meta: ChannelMeta,
}

impl ChannelRealization {
    pub fn new(h: CMatrix, block_index: usize, meta: ChannelMeta) -> Self {
        let svd = Svd::new(&h);
        Self {
            h,
            svd,
            block_index,
            meta,
        }
    }

    pub fn n_rx(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.ncols()
    }
}

/// Total complex noise power per sample; each real dimension gets half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub variance: f64,
}

/// Draws the per-path Jakes processes for `cfg` in row-major path order.
///
/// `E0 = 1` gives unit power once the random start time averages each
/// `cos²(ω_n t)` to 1/2. With zero Doppler every cosine is 1 and the power
/// doubles, so `E0 = 1/√2` there.
pub fn draw_paths<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> Vec<JakesParams> {
    let (window, power) = if cfg.max_doppler_hz > 0.0 {
        (1e4 / cfg.max_doppler_hz, 1.0)
    } else {
        (1.0, FRAC_1_SQRT_2)
    };
    (0..cfg.n_rx * cfg.n_tx)
        .map(|_| {
            let t0 = rng.random_range(0.0..window);
            let mut p = JakesParams::random(cfg.oscillators, cfg.max_doppler_hz, cfg.block_period_s, t0, rng);
            p.power = power;
            p
        })
        .collect()
}

fn validate(cfg: &ChannelConfig) -> Result<()> {
    if cfg.blocks == 0 {
        return Err(Error::Domain("channel sequence needs at least one block".into()));
    }
    if cfg.n_rx == 0 || cfg.n_tx == 0 {
        return Err(Error::Domain("channel needs at least one antenna per side".into()));
    }
    if cfg.oscillators == 0 {
        return Err(Error::Domain("Jakes generator needs at least one oscillator".into()));
    }
    if !(cfg.max_doppler_hz >= 0.0) {
        return Err(Error::Domain("maximum Doppler must be non-negative".into()));
    }
    Ok(())
}

fn rayleigh_matrices(cfg: &ChannelConfig, seed: u64) -> Result<Vec<CMatrix>> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = draw_paths(cfg, &mut rng);
    Ok((0..cfg.blocks)
        .map(|l| CMatrix::from_fn(cfg.n_rx, cfg.n_tx, |i, j| paths[i * cfg.n_tx + j].sample(l as u64)))
        .collect())
}

/// Rayleigh block-fading sequence with unit average path power.
pub fn gen_rayleigh_sequence(cfg: &ChannelConfig, seed: u64) -> Result<Vec<ChannelRealization>> {
    let meta = ChannelMeta {
        doppler_hz: cfg.max_doppler_hz,
        rician_factor: 0.0,
        seed,
    };
    Ok(rayleigh_matrices(cfg, seed)?
        .into_iter()
        .enumerate()
        .map(|(l, h)| ChannelRealization::new(h, l, meta))
        .collect())
}

/// Unit-modulus rank-one line-of-sight matrix `a_r · a_tᵀ` built from two
/// random phase ramps.
#[derive(Debug, Clone, PartialEq)]
pub struct LosComponent {
    pub h: CMatrix,
}

impl LosComponent {
    pub fn draw<R: Rng + ?Sized>(n_rx: usize, n_tx: usize, rng: &mut R) -> Self {
        let mut ramp = |n: usize| -> Vec<Complex64> {
            let offset: f64 = rng.random_range(0.0..2.0 * PI);
            let step: f64 = rng.random_range(0.0..2.0 * PI);
            (0..n)
                .map(|k| Complex64::from_polar(1.0, offset + k as f64 * step))
                .collect()
        };
        let a_r = ramp(n_rx);
        let a_t = ramp(n_tx);
        Self {
            h: CMatrix::from_fn(n_rx, n_tx, |i, j| a_r[i] * a_t[j]),
        }
    }
}

/// `H = sqrt(K/(K+1)) H_LoS + sqrt(1/(K+1)) H_scatter`, with `H_scatter` the
/// Rayleigh sequence for the same `seed`.
pub fn gen_rician_sequence(
    cfg: &ChannelConfig,
    rician_factor: f64,
    los: &LosComponent,
    seed: u64,
) -> Result<Vec<ChannelRealization>> {
    if !(rician_factor >= 0.0) || !rician_factor.is_finite() {
        return Err(Error::Domain(format!("Rician factor must be finite and >= 0, got {rician_factor}")));
    }
    if los.h.shape() != (cfg.n_rx, cfg.n_tx) {
        return Err(Error::Dimension {
            op: "rician line-of-sight",
            left: los.h.shape(),
            right: (cfg.n_rx, cfg.n_tx),
        });
    }
    let meta = ChannelMeta {
        doppler_hz: cfg.max_doppler_hz,
        rician_factor,
        seed,
    };
    let los_w = (rician_factor / (rician_factor + 1.0)).sqrt();
    let scatter_w = (1.0 / (rician_factor + 1.0)).sqrt();
    Ok(rayleigh_matrices(cfg, seed)?
        .into_iter()
        .enumerate()
        .map(|(l, scatter)| {
            let h = if rician_factor == 0.0 {
                scatter
            } else {
                los.h.map(|v| v * los_w) + scatter.map(|v| v * scatter_w)
            };
            ChannelRealization::new(h, l, meta)
        })
        .collect())
}

/// i.i.d. circularly-symmetric complex Gaussian noise with per-entry variance
/// `spec.variance`.
pub fn awgn<R: Rng + ?Sized>(rows: usize, cols: usize, spec: NoiseSpec, rng: &mut R) -> CMatrix {
    let std = (spec.variance.max(0.0) / 2.0).sqrt();
    // Column-major fill order, matching nalgebra storage.
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * std, im * std)
    })
}

/// Writes `block,rx,tx,re,im` rows for every entry of every realization.
pub fn write_channel_csv<W: Write>(realizations: &[ChannelRealization], w: &mut W) -> Result<()> {
    writeln!(w, "block,rx,tx,re,im")?;
    for ch in realizations {
        for i in 0..ch.n_rx() {
            for j in 0..ch.n_tx() {
                let v = ch.h[(i, j)];
                writeln!(w, "{},{},{},{:e},{:e}", ch.block_index, i, j, v.re, v.im)?;
            }
        }
    }
    Ok(())
}
