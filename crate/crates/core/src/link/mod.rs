//! Transmit chain: bits → QPSK → SVD precoding → PA → channel → noise.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{awgn, write_channel_csv, ChannelRealization, CMatrix, NoiseSpec};
use crate::detectors::PreprocScales;
use crate::error::{Error, Result};

/// Complex samples, `[streams-or-antennas × symbols]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFrame {
    samples: CMatrix,
}

impl ComplexFrame {
    pub fn new(samples: CMatrix) -> Self {
        Self { samples }
    }

    pub fn zeros(rows: usize, symbols: usize) -> Self {
        Self::new(CMatrix::zeros(rows, symbols))
    }

    pub fn rows(&self) -> usize {
        self.samples.nrows()
    }

    pub fn symbols(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &CMatrix {
        &self.samples
    }

    pub fn into_samples(self) -> CMatrix {
        self.samples
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Columns `[start, start + len)`.
    pub fn columns(&self, start: usize, len: usize) -> Self {
        Self::new(self.samples.columns(start, len).into_owned())
    }
}

/// One coherence block, pilots first.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionBlock {
    pub s_p: ComplexFrame,
    pub y_p: ComplexFrame,
    pub s_d: ComplexFrame,
    pub y_d: ComplexFrame,
    /// Ground-truth payload bits in [`qpsk_modulate`] order.
    pub bits: Vec<u8>,
    pub noise_variance: f64,
    pub channel: ChannelRealization,
    pub precoder: CMatrix,
    pub scales: Option<PreprocScales>,
}

impl TransmissionBlock {
    pub fn pilots(&self) -> usize {
        self.s_p.symbols()
    }

    pub fn payload(&self) -> usize {
        self.s_d.symbols()
    }

    pub fn streams(&self) -> usize {
        self.s_p.rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaModel {
    /// `Σ a_i s^(2i−1)` on the complex sample.
    #[default]
    Literal,
    /// `Σ a_i s |s|^(2(i−1))`, an AM/AM form that keeps the input phase.
    Amplitude,
}

/// Odd-order PA polynomial coefficients `a_1, a_3, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PACoeffs {
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub model: PaModel,
}

impl PACoeffs {
    pub fn new(coeffs: Vec<f64>, model: PaModel) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain("PA needs at least one finite coefficient".into()));
        }
        Ok(Self { coeffs, model })
    }

    /// `a_1 = 1, a_3 = −1.5, a_5 = −0.3`.
    pub fn paper() -> Self {
        Self {
            coeffs: vec![1.0, -1.5, -0.3],
            model: PaModel::Literal,
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        match self.model {
            PaModel::Literal => {
                let s2 = s * s;
                let mut pow = s;
                let mut acc = Complex64::new(0.0, 0.0);
                for a in &self.coeffs {
                    acc += pow * *a;
                    pow *= s2;
                }
                acc
            }
            PaModel::Amplitude => {
                let r2 = s.norm_sqr();
                let mut gain = 0.0;
                let mut pow = 1.0;
                for a in &self.coeffs {
                    gain += a * pow;
                    pow *= r2;
                }
                s * gain
            }
        }
    }
}

pub const QPSK_BITS_PER_SYMBOL: usize = 2;

/// Gray-mapped QPSK, `(b_I, b_Q) → ((1−2b_I) + j(1−2b_Q))/√2`.
///
/// Bits fill stream-major: stream 0 takes the first `2·T` bits across its `T`
/// symbols, then stream 1, and so on.
pub fn qpsk_modulate(bits: &[u8], streams: usize) -> Result<ComplexFrame> {
    if streams == 0 || bits.len() % (QPSK_BITS_PER_SYMBOL * streams) != 0 {
        return Err(Error::Framing(format!(
            "{} bits do not fill {streams} QPSK streams",
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::Framing(format!("bit value {b} is not 0 or 1")));
    }
    let symbols = bits.len() / (QPSK_BITS_PER_SYMBOL * streams);
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let level = |b: u8| if b == 0 { a } else { -a };
    let m = CMatrix::from_fn(streams, symbols, |i, t| {
        let k = 2 * (i * symbols + t);
        Complex64::new(level(bits[k]), level(bits[k + 1]))
    });
    Ok(ComplexFrame::new(m))
}

/// Hard decisions `b_I = Re < 0`, `b_Q = Im < 0`, inverse of [`qpsk_modulate`].
pub fn qpsk_hard_bits(frame: &ComplexFrame) -> Vec<u8> {
    let m = frame.samples();
    let mut bits = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for t in 0..m.ncols() {
            let z = m[(i, t)];
            bits.push(u8::from(z.re < 0.0));
            bits.push(u8::from(z.im < 0.0));
        }
    }
    bits
}

/// The leading `n_streams` right singular vectors, `[N_s × n_streams]`.
pub fn svd_precoder(ch: &ChannelRealization, n_streams: usize) -> Result<CMatrix> {
    let limit = ch.n_rx().min(ch.n_tx());
    if n_streams == 0 || n_streams > limit {
        return Err(Error::Domain(format!(
            "{n_streams} streams not supported by a {}x{} channel",
            ch.n_rx(),
            ch.n_tx()
        )));
    }
    Ok(ch.svd.v.columns(0, n_streams).into_owned())
}

pub fn pa_apply(x: &ComplexFrame, c: &PACoeffs) -> ComplexFrame {
    ComplexFrame::new(x.samples().map(|s| c.eval(s)))
}

/// `σ² = Es / (m · 10^(ebn0_db/10))`.
pub fn ebn0_to_noise_variance(ebn0_db: f64, bits_per_symbol: usize, symbol_energy: f64) -> f64 {
    symbol_energy / (bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0))
}

/// `Y = H · g(F · S) + N`, split into pilot and payload columns.
pub fn transmit_block<R: Rng + ?Sized>(
    s: &ComplexFrame,
    ch: &ChannelRealization,
    precoder: &CMatrix,
    pa: Option<&PACoeffs>,
    noise_variance: f64,
    pilots: usize,
    rng: &mut R,
) -> Result<TransmissionBlock> {
    if precoder.shape() != (ch.n_tx(), s.rows()) {
        return Err(Error::Dimension {
            op: "precoder",
            left: precoder.shape(),
            right: (ch.n_tx(), s.rows()),
        });
    }
    if pilots > s.symbols() {
        return Err(Error::Framing(format!("{pilots} pilots exceed a {}-symbol block", s.symbols())));
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::Domain(format!("noise variance {noise_variance} is negative")));
    }
    let tx = ComplexFrame::new(precoder * s.samples());
    let tx = match pa {
        Some(c) => pa_apply(&tx, c),
        None => tx,
    };
    let noise = awgn(ch.n_rx(), s.symbols(), NoiseSpec { variance: noise_variance }, rng);
    let y = ComplexFrame::new(&ch.h * tx.samples() + noise);
    let payload = s.symbols() - pilots;
    let s_d = s.columns(pilots, payload);
    Ok(TransmissionBlock {
        s_p: s.columns(0, pilots),
        y_p: y.columns(0, pilots),
        bits: qpsk_hard_bits(&s_d),
        s_d,
        y_d: y.columns(pilots, payload),
        noise_variance,
        channel: ch.clone(),
        precoder: precoder.clone(),
        scales: None,
    })
}

/// Block geometry and impairments for [`generate_block`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub streams: usize,
    pub pilots: usize,
    pub payload: usize,
    pub pa: Option<PACoeffs>,
    pub ebn0_db: f64,
}

/// Random QPSK pilots and payload through `ch`.
pub fn generate_block<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    cfg: &LinkConfig,
    rng: &mut R,
) -> Result<TransmissionBlock> {
    let k = cfg.pilots + cfg.payload;
    let bits: Vec<u8> = (0..QPSK_BITS_PER_SYMBOL * cfg.streams * k)
        .map(|_| rng.random_range(0..=1u8))
        .collect();
    let s = qpsk_modulate(&bits, cfg.streams)?;
    let f = svd_precoder(ch, cfg.streams)?;
    let sigma2 = ebn0_to_noise_variance(cfg.ebn0_db, QPSK_BITS_PER_SYMBOL, 1.0);
    transmit_block(&s, ch, &f, cfg.pa.as_ref(), sigma2, cfg.pilots, rng)
}

/// Channel audit CSV followed by a `role,stream,symbol,re,im` section.
pub fn write_block_csv<W: Write>(block: &TransmissionBlock, w: &mut W) -> Result<()> {
    write_channel_csv(std::slice::from_ref(&block.channel), w)?;
    writeln!(w, "role,stream,symbol,re,im")?;
    for (role, frame) in [("S_P", &block.s_p), ("Y_P", &block.y_p), ("S_D", &block.s_d), ("Y_D", &block.y_d)] {
        let m = frame.samples();
        for i in 0..m.nrows() {
            for t in 0..m.ncols() {
                writeln!(w, "{role},{i},{t},{:e},{:e}", m[(i, t)].re, m[(i, t)].im)?;
            }
        }
    }
    Ok(())
}
