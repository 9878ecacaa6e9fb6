//! Seeded construction of random band-limited fields.
//!
//! Coefficients are drawn as independent complex Gaussians on the modes whose
//! frequency magnitude falls inside a requested band, Hermitian-symmetrized
//! so the samples are real, with the zero mode left empty (mean-free). The
//! same seed always reproduces the same field.

use crate::error::Result;
use crate::field::{RealField, Spectrum, VectorField};
use crate::grid::Grid;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Deterministic generator for field synthesis.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random mean-free field with spectrum supported on `xi_lo <= |xi| <= xi_hi`.
///
/// Nyquist slots are excluded so every downstream operator sees clean modes.
pub fn random_band_field(
    grid: &Arc<Grid>,
    xi_lo: f64,
    xi_hi: f64,
    rng: &mut ChaCha8Rng,
) -> Result<RealField> {
    let mut s = Spectrum::zeros(grid.clone());
    let dim = grid.dim();
    // draw on a canonical half-space, mirror the conjugate
    for (flat, idx) in grid.indices().enumerate() {
        let x2 = grid.xi_sq(flat);
        if x2 == 0.0 {
            continue;
        }
        let xi = x2.sqrt();
        if xi < xi_lo || xi > xi_hi {
            continue;
        }
        if (0..dim).any(|ax| grid.is_nyquist(ax, idx[ax])) {
            continue;
        }
        let k = grid.wavevector(flat);
        if !is_canonical(&k) {
            continue;
        }
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let c = Complex64::new(re, im);
        s.coefficients_mut()[flat] = c;
        if let Some(neg) = grid.mode_index(&k.iter().map(|v| -v).collect::<Vec<_>>()) {
            s.coefficients_mut()[neg] = c.conj();
        }
    }
    s.to_real()
}

/// First nonzero component positive: picks one of each conjugate pair.
fn is_canonical(k: &[i64]) -> bool {
    for &v in k {
        if v > 0 {
            return true;
        }
        if v < 0 {
            return false;
        }
    }
    false
}

/// Random mean-free vector field, all components banded alike.
pub fn random_band_vector(
    grid: &Arc<Grid>,
    ncomp: usize,
    xi_lo: f64,
    xi_hi: f64,
    rng: &mut ChaCha8Rng,
) -> Result<VectorField> {
    let comps: Result<Vec<RealField>> =
        (0..ncomp).map(|_| random_band_field(grid, xi_lo, xi_hi, rng)).collect();
    VectorField::new(comps?)
}

/// Band covering everything below the dealias cutoff (safe default).
pub fn full_band(grid: &Arc<Grid>) -> (f64, f64) {
    (0.0, crate::ops::DEALIAS_FRACTION * grid.xi_max() / (grid.dim() as f64).sqrt())
}
