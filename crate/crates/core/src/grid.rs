//! Periodic lattice underpinning every field.
//!
//! A [`Grid`] is a uniform periodic lattice in 2 or 3 dimensions. Each axis
//! carries `n` points over a period `L`, so the lattice modes are the integer
//! wavevectors `k` with physical frequency `xi_i = k_i * 2*pi / L_i`. Modes
//! are stored in standard FFT order per axis (`0, 1, .., n/2, -n/2+1, .., -1`
//! with the Nyquist slot at index `n/2`).

use crate::error::{Error, Result};
use std::sync::Arc;

/// Uniform periodic lattice shared by all fields of a computation.
#[derive(Debug)]
pub struct Grid {
    dim: usize,
    sizes: Vec<usize>,
    period: Vec<f64>,
    /// Signed integer wavenumber per axis slot; Nyquist slot holds +n/2.
    wavenumbers: Vec<Vec<i64>>,
    /// |xi|^2 for every flat mode index.
    xi_sq: Vec<f64>,
    len: usize,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.period == other.period
    }
}

impl Grid {
    /// Cubic grid: `size` points per axis, one shared period.
    pub fn new(dim: usize, size: usize, period: f64) -> Result<Arc<Self>> {
        Self::with_axes(vec![size; dim], vec![period; dim])
    }

    /// Grid with per-axis point counts and periods.
    pub fn with_axes(sizes: Vec<usize>, period: Vec<f64>) -> Result<Arc<Self>> {
        let dim = sizes.len();
        if dim < 2 || dim > 3 {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if period.len() != dim {
            return Err(Error::InvalidGrid("period count != dim".into()));
        }
        for &n in &sizes {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "axis size {n} must be a power of two >= 8"
                )));
            }
        }
        for &l in &period {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("period {l} must be positive")));
            }
        }
        let wavenumbers: Vec<Vec<i64>> = sizes
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|i| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 })
                    .collect()
            })
            .collect();
        let len = sizes.iter().product();
        let mut grid = Grid { dim, sizes, period, wavenumbers, xi_sq: Vec::new(), len };
        let mut xi_sq = vec![0.0; len];
        for (flat, idx) in grid.indices().enumerate() {
            let mut s = 0.0;
            for ax in 0..dim {
                let xi = grid.xi(ax, idx[ax]);
                s += xi * xi;
            }
            xi_sq[flat] = s;
        }
        grid.xi_sq = xi_sq;
        Ok(Arc::new(grid))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn period(&self) -> &[f64] {
        &self.period
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Physical volume of the torus.
    pub fn volume(&self) -> f64 {
        self.period.iter().product()
    }

    /// Smallest lattice spacing over all axes.
    pub fn min_dx(&self) -> f64 {
        (0..self.dim)
            .map(|ax| self.period[ax] / self.sizes[ax] as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Signed integer wavenumber of axis slot `i`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> i64 {
        self.wavenumbers[axis][i]
    }

    /// Physical frequency of axis slot `i`: `k * 2*pi / L`.
    pub fn xi(&self, axis: usize, i: usize) -> f64 {
        self.wavenumbers[axis][i] as f64 * std::f64::consts::TAU / self.period[axis]
    }

    /// True if axis slot `i` is the (sign-ambiguous) Nyquist mode.
    pub fn is_nyquist(&self, axis: usize, i: usize) -> bool {
        i == self.sizes[axis] / 2
    }

    /// |xi|^2 of the flat mode index.
    pub fn xi_sq(&self, flat: usize) -> f64 {
        self.xi_sq[flat]
    }

    /// |xi| of the flat mode index.
    pub fn xi_norm(&self, flat: usize) -> f64 {
        self.xi_sq[flat].sqrt()
    }

    /// Smallest nonzero |xi| on the lattice.
    pub fn xi_min(&self) -> f64 {
        (0..self.dim)
            .map(|ax| std::f64::consts::TAU / self.period[ax])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest |xi| on the lattice (the Nyquist corner).
    pub fn xi_max(&self) -> f64 {
        (0..self.dim)
            .map(|ax| {
                let n2 = (self.sizes[ax] / 2) as f64;
                let xi = n2 * std::f64::consts::TAU / self.period[ax];
                xi * xi
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Flat index of a multi-index (row-major).
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for ax in 0..self.dim {
            f = f * self.sizes[ax] + idx[ax];
        }
        f
    }

    /// Iterate all multi-indices in row-major order.
    pub fn indices(&self) -> GridIndices {
        GridIndices { sizes: self.sizes.clone(), next: Some(vec![0; self.dim]) }
    }

    /// Physical coordinates of a lattice multi-index.
    pub fn coords(&self, idx: &[usize]) -> Vec<f64> {
        (0..self.dim)
            .map(|ax| idx[ax] as f64 * self.period[ax] / self.sizes[ax] as f64)
            .collect()
    }

    /// Integer wavevector of a flat mode index.
    pub fn wavevector(&self, flat: usize) -> Vec<i64> {
        let mut rem = flat;
        let mut k = vec![0i64; self.dim];
        for ax in (0..self.dim).rev() {
            let n = self.sizes[ax];
            k[ax] = self.wavenumbers[ax][rem % n];
            rem /= n;
        }
        k
    }

    /// Flat index of an integer wavevector, if representable on this lattice.
    pub fn mode_index(&self, k: &[i64]) -> Option<usize> {
        let mut f = 0usize;
        for ax in 0..self.dim {
            let n = self.sizes[ax] as i64;
            let kk = k[ax];
            if kk < -n / 2 || kk > n / 2 {
                return None;
            }
            // -n/2 and +n/2 share the Nyquist slot
            let slot = if kk >= 0 { kk } else { kk + n } as usize % self.sizes[ax];
            f = f * self.sizes[ax] + slot;
        }
        Some(f)
    }
}

/// Row-major iterator over lattice multi-indices.
pub struct GridIndices {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for GridIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut nxt = cur.clone();
        for ax in (0..self.sizes.len()).rev() {
            nxt[ax] += 1;
            if nxt[ax] < self.sizes[ax] {
                self.next = Some(nxt);
                return Some(cur);
            }
            nxt[ax] = 0;
        }
        Some(cur)
    }
}
