//! Physical-space and Fourier-space fields on a periodic lattice.
//!
//! A [`RealField`] holds real samples at lattice points; a [`Spectrum`] holds
//! the complex Fourier coefficients of such a field, normalized so a constant
//! field `c` has zero mode exactly `c`. Fields are immutable in spirit: every
//! operation returns a new value, so they are safe to share across threads.
//!
//! L2 norms carry the physical measure: `||f||^2 = vol * mean(f^2)`, which by
//! Parseval equals `vol * sum_k |fhat_k|^2`.

use crate::error::{Error, Result};
use crate::fft::fft_nd;
use crate::grid::Grid;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// What a scalar field represents inside a larger object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Scalar,
    VectorComponent,
    MatrixComponent,
}

/// Real samples on the lattice.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid>,
    data: Vec<f64>,
    role: Role,
}

/// Complex Fourier coefficients indexed by wavevector (FFT slot order).
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<Grid>,
    data: Vec<Complex64>,
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

impl RealField {
    pub fn new(grid: Arc<Grid>, data: Vec<f64>, role: Role) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "sample count {} != grid point count {}",
                data.len(),
                grid.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "field samples", index: i });
        }
        Ok(RealField { grid, data, role })
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.len();
        RealField { grid, data: vec![value; n], role: Role::Scalar }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Sample a function of physical coordinates onto the lattice.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for idx in grid.indices() {
            data.push(f(&grid.coords(&idx)));
        }
        RealField { grid, data, role: Role::Scalar }
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Forward transform, `1/N`-normalized (constant `c` -> zero mode `c`).
    pub fn to_spectrum(&self) -> Spectrum {
        let mut buf: Vec<Complex64> = self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut buf, self.grid.sizes(), true);
        let scale = 1.0 / self.grid.len() as f64;
        for c in &mut buf {
            *c *= scale;
        }
        Spectrum { grid: self.grid.clone(), data: buf }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// `||f||_{L2} = sqrt(vol * mean(f^2))`.
    pub fn l2_norm(&self) -> f64 {
        let ms = self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64;
        (self.grid.volume() * ms).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// L2 inner product `(f|g) = vol * mean(f g)`.
    pub fn inner(&self, other: &RealField) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        Ok(self.grid.volume() * s / self.data.len() as f64)
    }

    pub fn add(&self, other: &RealField) -> Result<RealField> {
        same_grid(&self.grid, &other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(RealField { grid: self.grid.clone(), data, role: self.role })
    }

    pub fn sub(&self, other: &RealField) -> Result<RealField> {
        same_grid(&self.grid, &other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(RealField { grid: self.grid.clone(), data, role: self.role })
    }

    pub fn scale(&self, s: f64) -> RealField {
        let data = self.data.iter().map(|v| v * s).collect();
        RealField { grid: self.grid.clone(), data, role: self.role }
    }

    pub fn add_scalar(&self, s: f64) -> RealField {
        let data = self.data.iter().map(|v| v + s).collect();
        RealField { grid: self.grid.clone(), data, role: self.role }
    }

    /// Raw pointwise product (no dealiasing; see `ops::dealiased_product`).
    pub fn mul_pointwise(&self, other: &RealField) -> Result<RealField> {
        same_grid(&self.grid, &other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(RealField { grid: self.grid.clone(), data, role: self.role })
    }

    /// Pointwise map; the closure must return finite values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        let data = self.data.iter().map(|&v| f(v)).collect();
        RealField { grid: self.grid.clone(), data, role: self.role }
    }
}

impl Spectrum {
    pub fn new(grid: Arc<Grid>, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid("coefficient count != grid point count".into()));
        }
        if let Some(i) = data.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite { context: "spectrum coefficients", index: i });
        }
        Ok(Spectrum { grid, data })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Spectrum { grid, data: vec![Complex64::default(); n] }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.data
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Inverse transform back to real samples.
    ///
    /// The imaginary residue of the inverse is checked against the field
    /// scale; a residue above 1e-6 relative signals a Hermitian-symmetry bug
    /// and is returned as an error rather than silently dropped.
    pub fn to_real(&self) -> Result<RealField> {
        let mut buf = self.data.clone();
        fft_nd(&mut buf, self.grid.sizes(), false);
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        for c in &buf {
            max_re = max_re.max(c.re.abs());
            max_im = max_im.max(c.im.abs());
        }
        if max_im > 1e-6 * (max_re + 1e-300) && max_im > 1e-12 {
            return Err(Error::NonFinite { context: "inverse transform imaginary residue", index: 0 });
        }
        let data = buf.iter().map(|c| c.re).collect();
        Ok(RealField { grid: self.grid.clone(), data, role: Role::Scalar })
    }

    pub fn zero_mode(&self) -> Complex64 {
        self.data[0]
    }

    pub fn set_zero_mode(&mut self, v: Complex64) {
        self.data[0] = v;
    }

    /// `||f||_{L2}` via Parseval: `sqrt(vol * sum |fhat|^2)`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.data.iter().map(|c| c.norm_sqr()).sum();
        (self.grid.volume() * s).sqrt()
    }

    /// Largest relative deviation from Hermitian symmetry
    /// (`fhat(-k) = conj(fhat(k))`).
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let scale = self.data.iter().fold(0.0f64, |m, c| m.max(c.norm())) + 1e-300;
        let mut worst = 0.0f64;
        for (flat, idx) in g.indices().enumerate() {
            let neg: Vec<usize> = (0..g.dim())
                .map(|ax| (g.sizes()[ax] - idx[ax]) % g.sizes()[ax])
                .collect();
            let nflat = g.flat(&neg);
            let defect = (self.data[nflat] - self.data[flat].conj()).norm();
            worst = worst.max(defect);
        }
        worst / scale
    }

    pub fn add(&self, other: &Spectrum) -> Result<Spectrum> {
        same_grid(&self.grid, &other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Spectrum { grid: self.grid.clone(), data })
    }

    pub fn sub(&self, other: &Spectrum) -> Result<Spectrum> {
        same_grid(&self.grid, &other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Spectrum { grid: self.grid.clone(), data })
    }

    pub fn scale(&self, s: f64) -> Spectrum {
        let data = self.data.iter().map(|c| c * s).collect();
        Spectrum { grid: self.grid.clone(), data }
    }

    /// Multiply each coefficient by a real factor of the flat mode index.
    pub fn multiplied(&self, f: impl Fn(usize) -> f64) -> Spectrum {
        let data = self.data.iter().enumerate().map(|(i, c)| c * f(i)).collect();
        Spectrum { grid: self.grid.clone(), data }
    }
}

/// `dim` scalar components on a shared grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    comps: Vec<RealField>,
}

impl VectorField {
    pub fn new(comps: Vec<RealField>) -> Result<Self> {
        let dim = comps[0].grid().dim();
        if comps.len() != dim && comps.len() != 3 {
            // director fields keep 3 components even on 2D grids
            return Err(Error::InvalidGrid(format!(
                "vector with {} components on a {dim}D grid",
                comps.len()
            )));
        }
        for c in &comps[1..] {
            same_grid(comps[0].grid(), c.grid())?;
        }
        let comps =
            comps.into_iter().map(|c| c.with_role(Role::VectorComponent)).collect();
        Ok(VectorField { comps })
    }

    pub fn zeros(grid: Arc<Grid>, ncomp: usize) -> Self {
        let comps = (0..ncomp)
            .map(|_| RealField::zeros(grid.clone()).with_role(Role::VectorComponent))
            .collect();
        VectorField { comps }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.comps[0].grid()
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, i: usize) -> &RealField {
        &self.comps[i]
    }

    pub fn comps(&self) -> &[RealField] {
        &self.comps
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        let comps: Result<Vec<_>> =
            self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect();
        Ok(VectorField { comps: comps? })
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        let comps: Result<Vec<_>> =
            self.comps.iter().zip(&other.comps).map(|(a, b)| a.sub(b)).collect();
        Ok(VectorField { comps: comps? })
    }

    pub fn scale(&self, s: f64) -> VectorField {
        VectorField { comps: self.comps.iter().map(|c| c.scale(s)).collect() }
    }

    /// Vector-valued L2 norm: sqrt of the sum of component norms squared.
    pub fn l2_norm(&self) -> f64 {
        self.comps.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    /// Pointwise Euclidean magnitude max over the lattice.
    pub fn max_magnitude(&self) -> f64 {
        let n = self.grid().len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let m: f64 = self.comps.iter().map(|c| c.values()[i] * c.values()[i]).sum();
            worst = worst.max(m);
        }
        worst.sqrt()
    }
}

/// `nrows x ncols` scalar components on a shared grid.
#[derive(Debug, Clone)]
pub struct MatrixField {
    rows: Vec<Vec<RealField>>,
}

impl MatrixField {
    pub fn new(rows: Vec<Vec<RealField>>) -> Result<Self> {
        let ncols = rows[0].len();
        let g = rows[0][0].grid().clone();
        for row in &rows {
            if row.len() != ncols {
                return Err(Error::InvalidGrid("ragged matrix field".into()));
            }
            for c in row {
                same_grid(&g, c.grid())?;
            }
        }
        let rows = rows
            .into_iter()
            .map(|row| row.into_iter().map(|c| c.with_role(Role::MatrixComponent)).collect())
            .collect();
        Ok(MatrixField { rows })
    }

    pub fn zeros(grid: Arc<Grid>, n: usize) -> Self {
        let rows = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| RealField::zeros(grid.clone()).with_role(Role::MatrixComponent))
                    .collect()
            })
            .collect();
        MatrixField { rows }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rows[0][0].grid()
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn comp(&self, i: usize, j: usize) -> &RealField {
        &self.rows[i][j]
    }

    pub fn add(&self, other: &MatrixField) -> Result<MatrixField> {
        let mut rows = Vec::with_capacity(self.rows.len());
        for (ra, rb) in self.rows.iter().zip(&other.rows) {
            let row: Result<Vec<_>> = ra.iter().zip(rb).map(|(a, b)| a.add(b)).collect();
            rows.push(row?);
        }
        Ok(MatrixField { rows })
    }

    pub fn sub(&self, other: &MatrixField) -> Result<MatrixField> {
        let mut rows = Vec::with_capacity(self.rows.len());
        for (ra, rb) in self.rows.iter().zip(&other.rows) {
            let row: Result<Vec<_>> = ra.iter().zip(rb).map(|(a, b)| a.sub(b)).collect();
            rows.push(row?);
        }
        Ok(MatrixField { rows })
    }

    pub fn scale(&self, s: f64) -> MatrixField {
        MatrixField {
            rows: self.rows.iter().map(|r| r.iter().map(|c| c.scale(s)).collect()).collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest pointwise |M(x) + M(x)^T| entry; zero for antisymmetric fields.
    pub fn max_symmetric_part(&self) -> f64 {
        let n = self.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let a = self.rows[i][j].values();
                let b = self.rows[j][i].values();
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max((x + y).abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid2() -> Arc<Grid> {
        Grid::new(2, 16, TAU).unwrap()
    }

    #[test]
    fn constant_field_has_single_mode() {
        let g = grid2();
        let f = RealField::constant(g.clone(), 2.5);
        let s = f.to_spectrum();
        assert!((s.zero_mode().re - 2.5).abs() < 1e-14);
        assert!(s.zero_mode().im.abs() < 1e-14);
        let rest: f64 = s.coefficients()[1..].iter().map(|c| c.norm()).sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn cosine_has_two_conjugate_modes() {
        let g = Grid::new(3, 8, TAU).unwrap();
        let f = RealField::from_fn(g.clone(), |x| x[0].cos());
        let s = f.to_spectrum();
        let plus = g.mode_index(&[1, 0, 0]).unwrap();
        let minus = g.mode_index(&[-1, 0, 0]).unwrap();
        assert!((s.coefficients()[plus].re - 0.5).abs() < 1e-13);
        assert!((s.coefficients()[minus].re - 0.5).abs() < 1e-13);
        let other: f64 = s
            .coefficients()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != plus && *i != minus)
            .map(|(_, c)| c.norm())
            .sum();
        assert!(other < 1e-12);
        assert!(s.hermitian_defect() < 1e-13);
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = grid2();
        let f = RealField::from_fn(g, |x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + 0.3);
        let s = f.to_spectrum();
        let back = s.to_real().unwrap();
        let diff = f.sub(&back).unwrap().l2_norm();
        assert!(diff <= 1e-12 * f.l2_norm());
        assert!((f.l2_norm() - s.l2_norm()).abs() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid2();
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(RealField::new(g, v, Role::Scalar).is_err());
    }

    #[test]
    fn rejects_mismatched_grids() {
        let a = RealField::zeros(grid2());
        let b = RealField::zeros(Grid::new(2, 32, TAU).unwrap());
        assert!(a.add(&b).is_err());
    }
}
