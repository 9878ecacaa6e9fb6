//! Helmholtz split of a velocity field into a compressible potential and an
//! incompressible antisymmetric part.
//!
//! With `Lambda = sqrt(-Laplace)`:
//!
//! * `h = Lambda^{-1} Div u` (scalar compressible potential),
//! * `Omega = Lambda^{-1} curl u`, `(curl u)_i^j = d_j u^i - d_i u^j`
//!   (antisymmetric matrix),
//!
//! and the velocity is recovered as `u = -Lambda^{-1} grad h +
//! Lambda^{-1} curl Omega`. The componentwise reading of `curl Omega` is
//! fixed by requiring `Laplace = grad Div - curl curl` to hold exactly on the
//! lattice, which gives `(curl Omega)_i = sum_j d_j Omega_j^i`.
//!
//! Both outputs are mean-free; the (conserved) component means are dropped.

use crate::error::Result;
use crate::field::{MatrixField, RealField, Spectrum, VectorField};
use num_complex::Complex64;

/// Spectral Helmholtz decomposition: `(h, Omega)` spectra from `u` spectra.
pub fn decompose_spectra(u: &[Spectrum]) -> Result<(Spectrum, Vec<Vec<Spectrum>>)> {
    let g = u[0].grid().clone();
    let dim = g.dim();
    let mut h = Spectrum::zeros(g.clone());
    let mut omega: Vec<Vec<Spectrum>> =
        (0..dim).map(|_| (0..dim).map(|_| Spectrum::zeros(g.clone())).collect()).collect();

    for (flat, idx) in g.indices().enumerate() {
        let x2 = g.xi_sq(flat);
        if x2 == 0.0 {
            continue;
        }
        // odd multipliers: skip sign-ambiguous Nyquist slots
        let nyq = (0..dim).any(|ax| g.is_nyquist(ax, idx[ax]));
        if nyq {
            continue;
        }
        let inv = 1.0 / x2.sqrt();
        let xi: Vec<f64> = (0..dim).map(|ax| g.xi(ax, idx[ax])).collect();
        let mut div = Complex64::default();
        for ax in 0..dim {
            div += Complex64::new(0.0, xi[ax]) * u[ax].coefficients()[flat];
        }
        h.coefficients_mut()[flat] = div * inv;
        for i in 0..dim {
            for j in 0..dim {
                let c = Complex64::new(0.0, xi[j]) * u[i].coefficients()[flat]
                    - Complex64::new(0.0, xi[i]) * u[j].coefficients()[flat];
                omega[i][j].coefficients_mut()[flat] = c * inv;
            }
        }
    }
    Ok((h, omega))
}

/// Spectral recomposition: `u = -Lambda^{-1} grad h + Lambda^{-1} curl Omega`.
pub fn recompose_spectra(h: &Spectrum, omega: &[Vec<Spectrum>]) -> Result<Vec<Spectrum>> {
    let g = h.grid().clone();
    let dim = g.dim();
    let mut u: Vec<Spectrum> = (0..dim).map(|_| Spectrum::zeros(g.clone())).collect();
    for (flat, idx) in g.indices().enumerate() {
        let x2 = g.xi_sq(flat);
        if x2 == 0.0 {
            continue;
        }
        if (0..dim).any(|ax| g.is_nyquist(ax, idx[ax])) {
            continue;
        }
        let inv = 1.0 / x2.sqrt();
        let xi: Vec<f64> = (0..dim).map(|ax| g.xi(ax, idx[ax])).collect();
        for i in 0..dim {
            let mut c = -Complex64::new(0.0, xi[i]) * h.coefficients()[flat];
            for j in 0..dim {
                c += Complex64::new(0.0, xi[j]) * omega[j][i].coefficients()[flat];
            }
            u[i].coefficients_mut()[flat] = c * inv;
        }
    }
    Ok(u)
}

/// Field-level decomposition of a (mean-free) velocity field.
pub fn decompose(u: &VectorField) -> Result<(RealField, MatrixField)> {
    let dim = u.grid().dim();
    let spectra: Vec<Spectrum> = (0..dim).map(|i| u.comp(i).to_spectrum()).collect();
    let (h, omega) = decompose_spectra(&spectra)?;
    let h = h.to_real()?;
    let mut rows = Vec::with_capacity(dim);
    for row in omega {
        let r: Result<Vec<RealField>> = row.iter().map(|s| s.to_real()).collect();
        rows.push(r?);
    }
    Ok((h, MatrixField::new(rows)?))
}

/// Field-level recomposition.
pub fn recompose(h: &RealField, omega: &MatrixField) -> Result<VectorField> {
    let dim = h.grid().dim();
    let hs = h.to_spectrum();
    let mut om = Vec::with_capacity(dim);
    for i in 0..dim {
        let row: Vec<Spectrum> = (0..dim).map(|j| omega.comp(i, j).to_spectrum()).collect();
        om.push(row);
    }
    let u = recompose_spectra(&hs, &om)?;
    let comps: Result<Vec<RealField>> = u.iter().map(|s| s.to_real()).collect();
    VectorField::new(comps?)
}
