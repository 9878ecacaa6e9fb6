//! Spectral differential operators and dealiasing.
//!
//! All operators act as Fourier multipliers. Homogeneous powers of `Lambda =
//! sqrt(-Laplace)` map the zero mode to zero (homogeneous spaces are defined
//! modulo polynomials, so means are carried separately). Odd derivatives zero
//! the Nyquist modes, whose sign is ambiguous on a real grid.

use crate::error::Result;
use crate::field::{MatrixField, RealField, Spectrum, VectorField};
use num_complex::Complex64;

/// Fraction of Nyquist retained by [`dealias`]; the classical 2/3 rule.
pub const DEALIAS_FRACTION: f64 = 2.0 / 3.0;

/// `Lambda^order`: multiply the coefficient at `xi` by `|xi|^order`.
///
/// The zero mode is mapped to zero for every `order != 0`.
pub fn lambda_pow(s: &Spectrum, order: f64) -> Spectrum {
    if order == 0.0 {
        return s.clone();
    }
    let g = s.grid().clone();
    s.multiplied(|flat| {
        let x2 = g.xi_sq(flat);
        if x2 == 0.0 {
            0.0
        } else {
            x2.powf(0.5 * order)
        }
    })
}

/// `-Laplace` as a multiplier is `|xi|^2`; this returns `Laplace f`.
pub fn laplacian(s: &Spectrum) -> Spectrum {
    let g = s.grid().clone();
    s.multiplied(|flat| -g.xi_sq(flat))
}

/// Partial derivative along one axis: multiply by `i xi_axis`.
///
/// Nyquist slots on that axis are zeroed.
pub fn derivative(s: &Spectrum, axis: usize) -> Spectrum {
    let g = s.grid().clone();
    let mut out = Spectrum::zeros(g.clone());
    let coeffs = s.coefficients();
    let target = out.coefficients_mut();
    for (flat, idx) in g.indices().enumerate() {
        if g.is_nyquist(axis, idx[axis]) {
            continue;
        }
        let xi = g.xi(axis, idx[axis]);
        target[flat] = coeffs[flat] * Complex64::new(0.0, xi);
    }
    out
}

/// Spectral gradient of a scalar field.
pub fn grad(f: &RealField) -> Result<VectorField> {
    let s = f.to_spectrum();
    let dim = f.grid().dim();
    let comps: Result<Vec<RealField>> =
        (0..dim).map(|ax| derivative(&s, ax).to_real()).collect();
    VectorField::new(comps?)
}

/// Spectral divergence of a vector field.
pub fn div(v: &VectorField) -> Result<RealField> {
    let dim = v.grid().dim();
    let mut acc = Spectrum::zeros(v.grid().clone());
    for ax in 0..dim {
        acc = acc.add(&derivative(&v.comp(ax).to_spectrum(), ax))?;
    }
    acc.to_real()
}

/// Antisymmetric matrix curl: entry `(i, j)` is `d_j v_i - d_i v_j`.
pub fn curl_mat(v: &VectorField) -> Result<MatrixField> {
    let dim = v.grid().dim();
    let spectra: Vec<Spectrum> = (0..dim).map(|i| v.comp(i).to_spectrum()).collect();
    let mut rows = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut row = Vec::with_capacity(dim);
        for j in 0..dim {
            let s = derivative(&spectra[i], j).sub(&derivative(&spectra[j], i))?;
            row.push(s.to_real()?);
        }
        rows.push(row);
    }
    MatrixField::new(rows)
}

/// Row divergence of a matrix field: `(Div M)_i = sum_j d_j M_{ij}`.
pub fn div_rows(m: &MatrixField) -> Result<VectorField> {
    let dim = m.grid().dim();
    let mut comps = Vec::with_capacity(m.nrows());
    for i in 0..m.nrows() {
        let mut acc = Spectrum::zeros(m.grid().clone());
        for j in 0..dim {
            acc = acc.add(&derivative(&m.comp(i, j).to_spectrum(), j))?;
        }
        comps.push(acc.to_real()?);
    }
    VectorField::new(comps)
}

/// Cutoff test of the 2/3 rule: keep a mode iff every `|k_i|` stays at or
/// below `fraction * n_i/2`.
pub fn mode_within_cutoff(
    grid: &crate::grid::Grid,
    idx: &[usize],
    fraction: f64,
) -> bool {
    for ax in 0..grid.dim() {
        let k = grid.wavenumber(ax, idx[ax]).unsigned_abs() as f64;
        if k > fraction * (grid.sizes()[ax] as f64) / 2.0 + 1e-12 {
            return false;
        }
    }
    true
}

/// Zero every mode with any `|k_i|` above `fraction` of Nyquist. Idempotent.
pub fn dealias_fraction(s: &Spectrum, fraction: f64) -> Spectrum {
    let g = s.grid().clone();
    let mut out = s.clone();
    let coeffs = out.coefficients_mut();
    for (flat, idx) in g.indices().enumerate() {
        if !mode_within_cutoff(&g, &idx, fraction) {
            coeffs[flat] = Complex64::default();
        }
    }
    out
}

/// The default 2/3-rule dealiasing.
pub fn dealias(s: &Spectrum) -> Spectrum {
    dealias_fraction(s, DEALIAS_FRACTION)
}

/// Pointwise product of two fields, transformed and dealiased.
///
/// This is the building block for every quadratic term: for inputs that are
/// band-limited to the 2/3 cutoff the result equals the exact (padded)
/// product projected back onto the retained band.
pub fn dealiased_product_spectrum(a: &RealField, b: &RealField) -> Result<Spectrum> {
    Ok(dealias(&a.mul_pointwise(b)?.to_spectrum()))
}

/// Physical-space version of [`dealiased_product_spectrum`].
pub fn dealiased_product(a: &RealField, b: &RealField) -> Result<RealField> {
    dealiased_product_spectrum(a, b)?.to_real()
}

/// Project a field onto its mean-free part.
pub fn remove_mean(f: &RealField) -> RealField {
    f.add_scalar(-f.mean())
}
