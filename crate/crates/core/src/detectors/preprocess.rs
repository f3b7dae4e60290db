//! Flattening, max-abs normalization and noisy augmentation of signal pairs.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::CMatrix;
use crate::error::{Error, Result};
use crate::link::ComplexFrame;
use crate::nn::RealMatrix;

/// Frame `[streams × T]` → rows `[T × 2·streams]`, with row `t` holding
/// `Re s_0, Im s_0, Re s_1, Im s_1, …` for symbol `t`.
pub fn flatten(frame: &ComplexFrame) -> RealMatrix {
    let m = frame.samples();
    let (streams, symbols) = m.shape();
    let mut out = RealMatrix::zeros(symbols, 2 * streams);
    for t in 0..symbols {
        let row = out.row_mut(t);
        for i in 0..streams {
            let z = m[(i, t)];
            row[2 * i] = z.re;
            row[2 * i + 1] = z.im;
        }
    }
    out
}

/// Inverse of [`flatten`].
pub fn unflatten(x: &RealMatrix) -> Result<ComplexFrame> {
    if x.cols() % 2 != 0 {
        return Err(Error::Framing(format!("cannot unflatten odd width {}", x.cols())));
    }
    let streams = x.cols() / 2;
    let m = CMatrix::from_fn(streams, x.rows(), |i, t| Complex64::new(x.get(t, 2 * i), x.get(t, 2 * i + 1)));
    Ok(ComplexFrame::new(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Each domain divided by its own per-feature maxima.
    #[default]
    PerDomain,
    /// Both domains divided by the transmitted-domain maxima.
    Shared,
}

/// Per-feature maxima of `|x|` for both signal domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocScales {
    pub s_max: Vec<f64>,
    pub y_max: Vec<f64>,
}

impl PreprocScales {
    pub fn normalize_s(&self, x: &RealMatrix) -> Result<RealMatrix> {
        normalize(x, &self.s_max)
    }

    pub fn normalize_y(&self, x: &RealMatrix) -> Result<RealMatrix> {
        normalize(x, &self.y_max)
    }

    pub fn denormalize_s(&self, x: &RealMatrix) -> Result<RealMatrix> {
        denormalize(x, &self.s_max)
    }

    pub fn denormalize_y(&self, x: &RealMatrix) -> Result<RealMatrix> {
        denormalize(x, &self.y_max)
    }
}

fn column_max_abs(x: &RealMatrix) -> Vec<f64> {
    let mut out = vec![0.0f64; x.cols()];
    for r in 0..x.rows() {
        for (m, v) in out.iter_mut().zip(x.row(r)) {
            *m = m.max(v.abs());
        }
    }
    out
}

fn check_positive(maxima: &[f64], offset: usize) -> Result<()> {
    match maxima.iter().position(|&m| !(m > 0.0) || !m.is_finite()) {
        Some(feature) => Err(Error::ZeroScale { feature: feature + offset }),
        None => Ok(()),
    }
}

/// Per-feature `max |x|` over the rows of each domain.
///
/// Zero maxima are reported as [`Error::ZeroScale`] with the feature index;
/// received-domain features are numbered after the transmitted ones.
pub fn fit_scales(s: &RealMatrix, y: &RealMatrix, mode: ScaleMode) -> Result<PreprocScales> {
    if s.rows() == 0 || y.rows() == 0 {
        return Err(Error::InsufficientData("scale fitting needs at least one row per domain".into()));
    }
    let s_max = column_max_abs(s);
    check_positive(&s_max, 0)?;
    let y_max = match mode {
        ScaleMode::PerDomain => {
            let m = column_max_abs(y);
            check_positive(&m, s_max.len())?;
            m
        }
        ScaleMode::Shared => {
            if y.cols() != s.cols() {
                return Err(Error::Dimension {
                    op: "shared scaling",
                    left: s.shape(),
                    right: y.shape(),
                });
            }
            s_max.clone()
        }
    };
    Ok(PreprocScales { s_max, y_max })
}

fn check_width(x: &RealMatrix, scales: &[f64]) -> Result<()> {
    if x.cols() != scales.len() {
        return Err(Error::Dimension {
            op: "normalize",
            left: x.shape(),
            right: (1, scales.len()),
        });
    }
    Ok(())
}

pub fn normalize(x: &RealMatrix, scales: &[f64]) -> Result<RealMatrix> {
    check_width(x, scales)?;
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (v, s) in out.row_mut(r).iter_mut().zip(scales) {
            *v /= s;
        }
    }
    Ok(out)
}

pub fn denormalize(x: &RealMatrix, scales: &[f64]) -> Result<RealMatrix> {
    check_width(x, scales)?;
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (v, s) in out.row_mut(r).iter_mut().zip(scales) {
            *v *= s;
        }
    }
    Ok(out)
}

/// Originals followed by `factor − 1` noisy copies of every pair, with
/// independent Gaussian noise on each side.
pub fn augment<R: Rng + ?Sized>(
    s: &RealMatrix,
    y: &RealMatrix,
    factor: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<(RealMatrix, RealMatrix)> {
    if factor == 0 {
        return Err(Error::Domain("augmentation factor must be at least 1".into()));
    }
    if s.rows() != y.rows() {
        return Err(Error::Dimension {
            op: "augment",
            left: s.shape(),
            right: y.shape(),
        });
    }
    let noise = Normal::new(0.0, noise_std.max(0.0))
        .map_err(|e| Error::Domain(format!("augmentation noise: {e}")))?;
    let copy = |x: &RealMatrix, rng: &mut R| -> RealMatrix {
        let mut out = RealMatrix::zeros(x.rows() * factor, x.cols());
        let n = x.data().len();
        out.data_mut()[..n].copy_from_slice(x.data());
        for k in 1..factor {
            for (o, v) in out.data_mut()[k * n..(k + 1) * n].iter_mut().zip(x.data()) {
                *o = v + if noise_std > 0.0 { noise.sample(rng) } else { 0.0 };
            }
        }
        out
    };
    let s_aug = copy(s, rng);
    let y_aug = copy(y, rng);
    Ok((s_aug, y_aug))
}
