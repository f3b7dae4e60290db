//! Sum-of-sinusoids Jakes generator for one fading path.
//!
//! ```text
//! h(t)  = E0 / sqrt(2 N0 + 1) · [h_I(t) + j h_Q(t)]
//! h_I(t) = 2 Σ_{n=1..N0} cos φ_n cos(ω_n t) + √2 cos φ_N cos(ω_d t)
//! h_Q(t) = 2 Σ_{n=1..N0} sin φ_n cos(ω_n t) + √2 sin φ_N cos(ω_d t)
//! ω_n   = ω_d cos(2π n / (4 N0 + 2))
//! ```
//!
//! With uniformly random phases and start time, `E|h|² = E0²`, and the time
//! autocorrelation of a single path approaches `J0(ω_d τ)`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct JakesParams {
    /// Amplitude scale `E0`; unit average path power when 1.
    pub power: f64,
    /// Maximum Doppler shift in Hz (`ω_d = 2π f_d`).
    pub max_doppler_hz: f64,
    pub sample_period_s: f64,
    pub initial_time_s: f64,
    /// `φ_1..φ_N0`; the oscillator count is `phases.len()`.
    pub phases: Vec<f64>,
    /// `φ_N`, the phase of the maximum-Doppler term.
    pub doppler_phase: f64,
}

impl JakesParams {
    /// Parameters with random phases drawn uniformly from `[0, 2π)` and the
    /// given start time.
    pub fn random<R: Rng + ?Sized>(
        oscillators: usize,
        max_doppler_hz: f64,
        sample_period_s: f64,
        initial_time_s: f64,
        rng: &mut R,
    ) -> Self {
        assert!(oscillators >= 1, "need at least one oscillator");
        let phases = (0..oscillators).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self {
            power: 1.0,
            max_doppler_hz,
            sample_period_s,
            initial_time_s,
            phases,
            doppler_phase: rng.random_range(0.0..2.0 * PI),
        }
    }

    pub fn oscillators(&self) -> usize {
        self.phases.len()
    }

    /// `E0 / sqrt(2 N0 + 1)`.
    pub fn prefactor(&self) -> f64 {
        self.power / ((2 * self.oscillators() + 1) as f64).sqrt()
    }

    /// Angular frequency of oscillator `n` (1-based).
    pub fn oscillator_frequency(&self, n: usize) -> f64 {
        let n0 = self.oscillators();
        let omega_d = 2.0 * PI * self.max_doppler_hz;
        omega_d * (2.0 * PI * n as f64 / (4 * n0 + 2) as f64).cos()
    }

    /// Complex gain at absolute time `t`.
    pub fn at_time(&self, t: f64) -> Complex64 {
        let omega_d = 2.0 * PI * self.max_doppler_hz;
        let mut hi = 0.0;
        let mut hq = 0.0;
        for (i, phi) in self.phases.iter().enumerate() {
            let c = (self.oscillator_frequency(i + 1) * t).cos();
            hi += 2.0 * phi.cos() * c;
            hq += 2.0 * phi.sin() * c;
        }
        let c = (omega_d * t).cos();
        hi += SQRT_2 * self.doppler_phase.cos() * c;
        hq += SQRT_2 * self.doppler_phase.sin() * c;
        Complex64::new(hi, hq) * self.prefactor()
    }

    /// `h_k`, the gain at `t0 + k·T_s`.
    pub fn sample(&self, k: u64) -> Complex64 {
        self.at_time(self.initial_time_s + k as f64 * self.sample_period_s)
    }
}

/// `h_k` for the given parameters.
pub fn jakes_sample(params: &JakesParams, k: u64) -> Complex64 {
    params.sample(k)
}
