//! Full complex SVD with deterministic ordering and phases.
//!
//! nalgebra returns a thin decomposition in no particular order. We sort the
//! singular values descending, complete U and V to square unitary matrices,
//! and rotate each singular pair so the first significant entry of `v_i` is
//! real and positive (the same rotation is applied to `u_i`, so
//! `U^H H V = diag(σ)` is preserved).

use nalgebra::DVector;
use num_complex::Complex64;

use super::CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    /// `[n_rx × n_rx]`, unitary.
    pub u: CMatrix,
    /// Descending, length `min(n_rx, n_tx)`.
    pub sigma: Vec<f64>,
    /// `[n_tx × n_tx]`, unitary.
    pub v: CMatrix,
}

impl Svd {
    pub fn new(h: &CMatrix) -> Self {
        let (m, n) = h.shape();
        let r = m.min(n);
        let thin = h.clone().svd(true, true);
        let u_thin = thin.u.expect("svd computed with u");
        let v_thin = thin.v_t.expect("svd computed with v_t").adjoint();

        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| thin.singular_values[b].total_cmp(&thin.singular_values[a]));

        let sigma: Vec<f64> = order.iter().map(|&i| thin.singular_values[i].max(0.0)).collect();
        // Vectors paired with numerically zero singular values are not
        // reliably orthonormal; rebuild them by completion instead.
        let tol = sigma.first().copied().unwrap_or(0.0) * 1e-12;
        let kept: Vec<usize> = order.iter().copied().filter(|&i| thin.singular_values[i] > tol).collect();
        let mut u_cols: Vec<DVector<Complex64>> = kept.iter().map(|&i| u_thin.column(i).into_owned()).collect();
        let mut v_cols: Vec<DVector<Complex64>> = kept.iter().map(|&i| v_thin.column(i).into_owned()).collect();

        for (u, v) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
            let rot = phase_fix(v);
            *v *= rot;
            *u *= rot;
        }
        complete_basis(&mut u_cols, m);
        complete_basis(&mut v_cols, n);

        Self {
            u: CMatrix::from_columns(&u_cols),
            sigma,
            v: CMatrix::from_columns(&v_cols),
        }
    }

    pub fn rank_bound(&self) -> usize {
        self.sigma.len()
    }

    /// `U · diag(σ) · V^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let (m, n) = (self.u.nrows(), self.v.nrows());
        let mut s = CMatrix::zeros(m, n);
        for (i, &x) in self.sigma.iter().enumerate() {
            s[(i, i)] = Complex64::new(x, 0.0);
        }
        &self.u * s * self.v.adjoint()
    }
}

/// Unit-modulus factor that makes the first significant entry of `v` real
/// and positive.
fn phase_fix(v: &DVector<Complex64>) -> Complex64 {
    let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match v.iter().find(|z| z.norm() > 1e-8 * peak.max(f64::MIN_POSITIVE)) {
        Some(z) => z.conj() / z.norm(),
        None => Complex64::new(1.0, 0.0),
    }
}

/// Extends orthonormal `cols` to a basis of C^dim by Gram-Schmidt against
/// the standard basis vectors, taking the best-conditioned candidate first.
fn complete_basis(cols: &mut Vec<DVector<Complex64>>, dim: usize) {
    while cols.len() < dim {
        let mut best: Option<DVector<Complex64>> = None;
        let mut best_norm = 0.0;
        for e in 0..dim {
            let mut x = DVector::<Complex64>::zeros(dim);
            x[e] = Complex64::new(1.0, 0.0);
            // Two passes keep the result orthogonal to working precision.
            for _ in 0..2 {
                for c in cols.iter() {
                    let proj = c.dotc(&x);
                    x -= c * proj;
                }
            }
            let nrm = x.norm();
            if nrm > best_norm + 1e-12 {
                best_norm = nrm;
                best = Some(x);
            }
        }
        let mut x = best.expect("a standard basis vector survives projection");
        x /= Complex64::new(best_norm, 0.0);
        let rot = phase_fix(&x);
        x *= rot;
        cols.push(x);
    }
}
