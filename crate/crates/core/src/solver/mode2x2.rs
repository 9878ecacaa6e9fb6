//! Exact propagation of the per-mode acoustic block.
//!
//! With `u = 0` and no forcing, each Fourier mode of the `(rho - 1, h)` pair
//! obeys the linear system
//!
//! ```text
//! d/dt [vr]   [ 0        -|xi|   ] [vr]
//!      [ h] = [ |xi|   -nu |xi|^2] [ h]
//! ```
//!
//! whose trace is `-nu |xi|^2` and determinant `|xi|^2`. Below `|xi| = 2/nu`
//! the eigenvalues are a complex pair (oscillatory decay at rate
//! `nu |xi|^2 / 2`); above, two real rates with the slow one approaching
//! `-1/nu`; at `|xi| = 2/nu` exactly, a degenerate double eigenvalue with a
//! Jordan block and `(c1 + c2 t) e^{lambda t}` growth in between.
//!
//! [`AcousticModeSolution`] is the hand-derived closed form used as an
//! oracle; [`phi_matrices`] provides the `exp`/`phi1`/`phi2` matrix functions
//! that the IMEX steppers compose with explicit terms.

use num_complex::Complex64;

/// Real 2x2 matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [f64; 4]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([1.0, 0.0, 0.0, 1.0]);

    pub fn zero() -> Mat2 {
        Mat2([0.0; 4])
    }

    /// The acoustic block at frequency magnitude `xi`.
    pub fn acoustic(xi: f64, nu: f64) -> Mat2 {
        Mat2([0.0, -xi, xi, -nu * xi * xi])
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[3]
    }

    pub fn det(&self) -> f64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    /// Eigenvalues, complex pair when the discriminant is negative.
    pub fn eigenvalues(&self) -> (Complex64, Complex64) {
        let m = 0.5 * self.trace();
        let disc = m * m - self.det();
        if disc >= 0.0 {
            let w = disc.sqrt();
            (Complex64::new(m - w, 0.0), Complex64::new(m + w, 0.0))
        } else {
            let w = (-disc).sqrt();
            (Complex64::new(m, -w), Complex64::new(m, w))
        }
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2([self.0[0] * s, self.0[1] * s, self.0[2] * s, self.0[3] * s])
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2([
            self.0[0] + o.0[0],
            self.0[1] + o.0[1],
            self.0[2] + o.0[2],
            self.0[3] + o.0[3],
        ])
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        self.add(&o.scale(-1.0))
    }

    /// Apply to a complex 2-vector componentwise (the matrix is real).
    pub fn apply(&self, v: (Complex64, Complex64)) -> (Complex64, Complex64) {
        (
            v.0 * self.0[0] + v.1 * self.0[1],
            v.0 * self.0[2] + v.1 * self.0[3],
        )
    }
}

/// `phi_k(z) = sum_j z^j / (j+k)!`; `phi_0 = exp`, `phi_1 = (e^z-1)/z`,
/// `phi_2 = (e^z-1-z)/z^2`.
pub fn phi_scalar(k: u32, z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // truncated series; the tail at |z| = 0.5 is below 1e-19
        let mut term = Complex64::new(1.0 / factorial(k), 0.0);
        let mut sum = term;
        for j in 1..=24 {
            term = term * z / (j + k) as f64;
            sum += term;
        }
        sum
    } else {
        let e = z.exp();
        match k {
            0 => e,
            1 => (e - 1.0) / z,
            2 => (e - 1.0 - z) / (z * z),
            _ => unreachable!("only phi_0..phi_2 are used"),
        }
    }
}

/// Derivative `phi_k'(z) = sum_{j>=1} j z^{j-1} / (j+k)!`.
fn dphi_scalar(k: u32, z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(1.0 / factorial(k + 1), 0.0);
        let mut sum = term;
        let mut zpow = Complex64::new(1.0, 0.0);
        for j in 2..=24 {
            zpow *= z;
            term = zpow * (j as f64) / factorial_f(j + k);
            sum += term;
        }
        sum
    } else {
        let e = z.exp();
        let z2 = z * z;
        match k {
            0 => e,
            1 => (e * (z - 1.0) + 1.0) / z2,
            2 => (e * (z - 2.0) + z + 2.0) / (z2 * z),
            _ => unreachable!(),
        }
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product::<f64>().max(1.0)
}

fn factorial_f(k: u32) -> f64 {
    factorial(k)
}

/// Matrix function `phi_k(B)` for a real 2x2 `B` via spectral projectors,
/// with the exact Jordan formula when the eigenvalues (nearly) coincide.
pub fn phi_mat(k: u32, b: &Mat2) -> Mat2 {
    let (l1, l2) = b.eigenvalues();
    let scale = l1.norm() + l2.norm() + 1e-300;
    let gap = (l1 - l2).norm();
    if gap > 1e-7 * scale {
        // phi(B) = (phi(l2)(B - l1 I) - phi(l1)(B - l2 I)) / (l2 - l1)
        let p1 = phi_scalar(k, l1);
        let p2 = phi_scalar(k, l2);
        let denom = l2 - l1;
        let mut out = [0.0f64; 4];
        for (i, o) in out.iter_mut().enumerate() {
            let id = if i == 0 || i == 3 { 1.0 } else { 0.0 };
            let bi = b.0[i];
            let num = p2 * (bi - l1 * id) - p1 * (bi - l2 * id);
            *o = (num / denom).re;
        }
        Mat2(out)
    } else {
        // (B - m I)^2 = 0 by Cayley-Hamilton: phi(B) = phi(m) I + phi'(m)(B - m I)
        let m = (l1 + l2) * 0.5;
        let pm = phi_scalar(k, m);
        let dm = dphi_scalar(k, m);
        let mut out = [0.0f64; 4];
        for (i, o) in out.iter_mut().enumerate() {
            let id = if i == 0 || i == 3 { 1.0 } else { 0.0 };
            *o = (pm * id + dm * (b.0[i] - m.re * id)).re;
        }
        Mat2(out)
    }
}

/// The triple `(exp(A dt), dt phi_1(A dt), dt phi_2(A dt))` used by the
/// exponential steppers.
pub fn phi_matrices(a: &Mat2, dt: f64) -> (Mat2, Mat2, Mat2) {
    let b = a.scale(dt);
    let e = phi_mat(0, &b);
    let p1 = phi_mat(1, &b).scale(dt);
    let p2 = phi_mat(2, &b).scale(dt);
    (e, p1, p2)
}

/// Scalar analogue for the heat factors `lambda = -c |xi|^2`.
pub fn phi_scalars(lambda: f64, dt: f64) -> (f64, f64, f64) {
    let z = Complex64::new(lambda * dt, 0.0);
    (
        phi_scalar(0, z).re,
        dt * phi_scalar(1, z).re,
        dt * phi_scalar(2, z).re,
    )
}

/// Closed-form solution of the unforced acoustic mode pair.
#[derive(Debug, Clone)]
pub struct AcousticModeSolution {
    pub xi: f64,
    pub nu: f64,
    pub init: (Complex64, Complex64),
}

impl AcousticModeSolution {
    pub fn new(xi: f64, nu: f64, init: (Complex64, Complex64)) -> Self {
        assert!(xi > 0.0, "the acoustic oracle needs |xi| > 0");
        AcousticModeSolution { xi, nu, init }
    }

    /// Eigenvalues of the mode matrix; their sum is `-nu |xi|^2` and their
    /// product `|xi|^2`.
    pub fn eigenvalues(&self) -> (Complex64, Complex64) {
        Mat2::acoustic(self.xi, self.nu).eigenvalues()
    }

    /// The solution operator `exp(A t)`, written out by hand:
    /// with `m = -nu xi^2/2` and `disc = m^2 - xi^2`,
    ///
    /// * `disc > 0`: `e^{mt} [cosh(wt) I + sinh(wt)/w (A - mI)]`,
    /// * `disc < 0`: `e^{mt} [cos(wt) I + sin(wt)/w (A - mI)]`,
    /// * `disc = 0`: `e^{mt} [I + t (A - mI)]` (Jordan block),
    ///
    /// where `w = sqrt(|disc|)`.
    pub fn propagator(&self, t: f64) -> Mat2 {
        let a = Mat2::acoustic(self.xi, self.nu);
        let m = 0.5 * a.trace();
        let disc = m * m - a.det();
        let em = (m * t).exp();
        let shifted = a.sub(&Mat2::IDENTITY.scale(m));
        // near-degenerate discriminants fall back to the Jordan form; the
        // error is O(disc t^2), far below the 1e-10 oracle tolerances here
        if disc.abs() < 1e-24 * (m * m + a.det()).abs().max(1.0) {
            return Mat2::IDENTITY.add(&shifted.scale(t)).scale(em);
        }
        let w = disc.abs().sqrt();
        let (c, s_over_w) = if disc > 0.0 {
            ((w * t).cosh(), (w * t).sinh() / w)
        } else {
            ((w * t).cos(), (w * t).sin() / w)
        };
        Mat2::IDENTITY.scale(c).add(&shifted.scale(s_over_w)).scale(em)
    }

    /// Evaluate `(vr, h)` at time `t`.
    pub fn eval(&self, t: f64) -> (Complex64, Complex64) {
        self.propagator(t).apply(self.init)
    }
}
