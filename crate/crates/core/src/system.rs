//! The coupled density / velocity / director system and its reformulation.
//!
//! Physical variables: density `rho > 0`, velocity `u`, unit director `d`.
//! The momentum equation carries the elastic stress `grad d (.) grad d -
//! |grad d|^2/2 I` of the director field, the director relaxes by a
//! transported harmonic-map heat flow, and the pressure law is `P(rho) =
//! rho^2/2`.
//!
//! The working form replaces `u` by its Helmholtz pair `(h, Omega)` and the
//! density by `a = rho - 1`:
//!
//! ```text
//! da/dt     = -u . grad a - Lambda h - a Div u
//! dh/dt     = nu Laplace h + Lambda a + Lambda^{-1} Div N
//! dOmega/dt = mu Laplace Omega + Lambda^{-1} curl N
//! dd/dt     = Laplace d + |grad d|^2 d - u . grad d
//! ```
//!
//! with `nu = 2 mu + lambda` and the momentum nonlinearity
//! `N = -u.grad u - ((rho-1)/rho) A u - (1/rho) Div(stress)`,
//! `A = mu Laplace + (lambda + mu) grad Div`.

use crate::error::{Error, Result};
use crate::field::{MatrixField, RealField, Spectrum, VectorField};
use crate::grid::Grid;
use crate::helmholtz;
use crate::ops;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Density floor: breaching it means the run left the near-equilibrium
/// regime the solver is built for.
pub const DENSITY_FLOOR: f64 = 0.1;

/// Default tolerance on `||d| - 1|` for validated states.
pub const DIRECTOR_TOL: f64 = 1e-8;

/// Barotropic pressure law. Only the quadratic law is implemented; the enum
/// is the extension point for other convex laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
#[non_exhaustive]
pub enum PressureLaw {
    #[default]
    Quadratic,
}

/// Viscosities, coupling constants and the pressure law.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LCParams {
    /// Shear viscosity, `mu > 0`.
    pub mu: f64,
    /// Bulk viscosity, constrained by `2 mu + 3 lambda >= 0`.
    pub lambda: f64,
    /// Kinetic/potential competition constant; the analysis fixes 1.
    pub xi_c: f64,
    /// Director relaxation constant; the analysis fixes 1.
    pub theta: f64,
    pub pressure_law: PressureLaw,
}

impl LCParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        let p =
            LCParams { mu, lambda, xi_c: 1.0, theta: 1.0, pressure_law: PressureLaw::Quadratic };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::Config(format!("mu = {} must be positive", self.mu)));
        }
        if 2.0 * self.mu + 3.0 * self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "2 mu + 3 lambda = {} must be nonnegative",
                2.0 * self.mu + 3.0 * self.lambda
            )));
        }
        Ok(())
    }

    /// Effective viscosity of the compressible part: `nu = 2 mu + lambda`,
    /// always `>= 4/3 mu > 0` under the admissibility constraints.
    pub fn nu(&self) -> f64 {
        2.0 * self.mu + self.lambda
    }
}

/// Constant equilibrium `(rho, u, d) = (1, 0, d_hat)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Equilibrium {
    pub d_hat: [f64; 3],
}

impl Equilibrium {
    pub fn new(d_hat: [f64; 3]) -> Result<Self> {
        let n = (d_hat[0] * d_hat[0] + d_hat[1] * d_hat[1] + d_hat[2] * d_hat[2]).sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("|d_hat| = {n} != 1")));
        }
        Ok(Equilibrium { d_hat })
    }

    pub fn state(&self, grid: &Arc<Grid>) -> LCState {
        let rho = RealField::constant(grid.clone(), 1.0);
        let u = VectorField::zeros(grid.clone(), grid.dim());
        let d = VectorField::new(
            self.d_hat.iter().map(|&c| RealField::constant(grid.clone(), c)).collect(),
        )
        .expect("constant director");
        LCState { rho, u, d }
    }

    pub fn director(&self, grid: &Arc<Grid>) -> VectorField {
        self.state(grid).d
    }
}

/// Physical state `(rho, u, d)`.
#[derive(Debug, Clone)]
pub struct LCState {
    pub rho: RealField,
    pub u: VectorField,
    pub d: VectorField,
}

impl LCState {
    /// Validated constructor: positive density, unit director within
    /// [`DIRECTOR_TOL`].
    pub fn new(rho: RealField, u: VectorField, d: VectorField) -> Result<Self> {
        let s = LCState { rho, u, d };
        s.validate(DIRECTOR_TOL)?;
        Ok(s)
    }

    pub fn validate(&self, director_tol: f64) -> Result<()> {
        let min_rho = self.rho.min();
        if min_rho <= 0.0 {
            return Err(Error::NonPositiveDensity(min_rho));
        }
        let dev = director_deviation(&self.d);
        if dev > director_tol {
            return Err(Error::Config(format!(
                "director leaves the sphere: max ||d|-1| = {dev:.3e} > {director_tol:.1e}"
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }
}

/// Largest pointwise `||d(x)| - 1|`.
pub fn director_deviation(d: &VectorField) -> f64 {
    let n = d.grid().len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let m: f64 = d.comps().iter().map(|c| c.values()[i] * c.values()[i]).sum();
        worst = worst.max((m.sqrt() - 1.0).abs());
    }
    worst
}

/// Reformulated state `(a, h, Omega, d)` with `a = rho - 1`.
#[derive(Debug, Clone)]
pub struct ReformState {
    pub a: RealField,
    pub h: RealField,
    pub omega: MatrixField,
    pub d: VectorField,
}

impl ReformState {
    pub fn grid(&self) -> &Arc<Grid> {
        self.a.grid()
    }
}

/// Pointwise pressure `P(rho) = rho^2/2`.
pub fn pressure(rho: &RealField, law: PressureLaw) -> Result<RealField> {
    let min = rho.min();
    if min <= 0.0 {
        return Err(Error::NonPositiveDensity(min));
    }
    match law {
        PressureLaw::Quadratic => Ok(rho.map(|r| 0.5 * r * r)),
    }
}

/// Pointwise `P'(rho) = rho`.
pub fn dpressure(rho: &RealField, law: PressureLaw) -> Result<RealField> {
    let min = rho.min();
    if min <= 0.0 {
        return Err(Error::NonPositiveDensity(min));
    }
    match law {
        PressureLaw::Quadratic => Ok(rho.clone()),
    }
}

/// `P(rho) - P(1) - P'(1)(rho - 1)`, the convex deviation entering the
/// energy; `(rho - 1)^2 / 2` for the quadratic law.
fn pressure_deviation(rho: f64, law: PressureLaw) -> f64 {
    match law {
        PressureLaw::Quadratic => 0.5 * (rho - 1.0) * (rho - 1.0),
    }
}

/// Gradients of every director component: `G[m][j] = d_j d_m` physically.
fn director_gradient(d: &[Spectrum], dim: usize) -> Result<Vec<Vec<RealField>>> {
    let spectra: Vec<Spectrum> =
        d.iter().flat_map(|dm| (0..dim).map(move |j| ops::derivative(dm, j))).collect();
    let fields = batch_to_real(&spectra)?;
    Ok(fields.chunks(dim).map(|c| c.to_vec()).collect())
}

/// Parallel inverse transform of a batch of spectra.
pub(crate) fn batch_to_real(spectra: &[Spectrum]) -> Result<Vec<RealField>> {
    spectra.par_iter().map(|s| s.to_real()).collect()
}

/// Parallel forward transform (dealiased on request).
pub(crate) fn batch_to_spectrum(fields: &[RealField], dealias: bool) -> Vec<Spectrum> {
    fields
        .par_iter()
        .map(|f| {
            let s = f.to_spectrum();
            if dealias {
                ops::dealias(&s)
            } else {
                s
            }
        })
        .collect()
}

/// Elastic stress of the director: `grad d (.) grad d - |grad d|^2/2 I`,
/// entry `(i, j) = sum_m d_i d_m * d_j d_m`, products dealiased.
pub fn ericksen_stress(d: &VectorField) -> Result<MatrixField> {
    let dim = d.grid().dim();
    let spectra: Vec<Spectrum> = d.comps().iter().map(|c| c.to_spectrum()).collect();
    let g = director_gradient(&spectra, dim)?;
    stress_from_gradient(&g, d.grid(), true)
}

fn stress_from_gradient(
    g: &[Vec<RealField>],
    grid: &Arc<Grid>,
    dealias: bool,
) -> Result<MatrixField> {
    let dim = grid.dim();
    let n = grid.len();
    let mut gsq = vec![0.0f64; n];
    for row in g {
        for comp in row {
            for (acc, v) in gsq.iter_mut().zip(comp.values()) {
                *acc += v * v;
            }
        }
    }
    let mut rows = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut row = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut vals = vec![0.0f64; n];
            for gm in g {
                for ((acc, x), y) in vals.iter_mut().zip(gm[i].values()).zip(gm[j].values()) {
                    *acc += x * y;
                }
            }
            if i == j {
                for (acc, s) in vals.iter_mut().zip(&gsq) {
                    *acc -= 0.5 * s;
                }
            }
            let f = RealField::new(grid.clone(), vals, crate::field::Role::MatrixComponent)?;
            let f = if dealias { ops::dealias(&f.to_spectrum()).to_real()? } else { f };
            row.push(f);
        }
        rows.push(row);
    }
    MatrixField::new(rows)
}

/// Divergence of the elastic stress, `(Div S)_i = sum_j d_j S_{ij}`.
pub fn stress_div(d: &VectorField) -> Result<VectorField> {
    let s = ericksen_stress(d)?;
    ops::div_rows(&s)
}

/// `A u = mu Laplace u + (lambda + mu) grad Div u`, evaluated spectrally.
pub fn operator_a(u: &VectorField, p: &LCParams) -> Result<VectorField> {
    let dim = u.grid().dim();
    let spectra: Vec<Spectrum> = (0..dim).map(|i| u.comp(i).to_spectrum()).collect();
    let out = operator_a_spectra(&spectra, p);
    VectorField::new(batch_to_real(&out)?)
}

pub(crate) fn operator_a_spectra(u: &[Spectrum], p: &LCParams) -> Vec<Spectrum> {
    let g = u[0].grid().clone();
    let dim = g.dim();
    let mut div = Spectrum::zeros(g.clone());
    for (ax, us) in u.iter().enumerate() {
        div = div.add(&ops::derivative(us, ax)).expect("same grid");
    }
    (0..dim)
        .map(|i| {
            let lap = ops::laplacian(&u[i]).scale(p.mu);
            let gd = ops::derivative(&div, i).scale(p.lambda + p.mu);
            lap.add(&gd).expect("same grid")
        })
        .collect()
}

/// The momentum nonlinearity
/// `N = -u.grad u - ((rho-1)/rho) A u - (1/rho) Div(stress)`,
/// assembled pointwise with dealiased products.
///
/// Writing the stress through `d - d_hat` changes nothing: constant shifts
/// vanish under the gradient, so the two forms agree bit for bit.
pub fn nonlinear_n(state: &LCState, p: &LCParams) -> Result<VectorField> {
    let min_rho = state.rho.min();
    if min_rho < DENSITY_FLOOR {
        return Err(Error::DensityFloor { min_rho, time: f64::NAN });
    }
    let dim = state.grid().dim();
    let u_spec: Vec<Spectrum> = (0..dim).map(|i| state.u.comp(i).to_spectrum()).collect();
    let au = VectorField::new(batch_to_real(&operator_a_spectra(&u_spec, p))?)?;
    let sdiv = stress_div(&state.d)?;
    let grad_u: Vec<Vec<RealField>> = {
        let spectra: Vec<Spectrum> = u_spec
            .iter()
            .flat_map(|us| (0..dim).map(move |j| ops::derivative(us, j)))
            .collect();
        batch_to_real(&spectra)?.chunks(dim).map(|c| c.to_vec()).collect()
    };
    let n = state.grid().len();
    let mut comps = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut vals = vec![0.0f64; n];
        for (k, v) in vals.iter_mut().enumerate() {
            let rho = state.rho.values()[k];
            let mut conv = 0.0;
            for j in 0..dim {
                conv += state.u.comp(j).values()[k] * grad_u[i][j].values()[k];
            }
            let frac = (rho - 1.0) / rho;
            *v = -conv
                - frac * au.comp(i).values()[k]
                - p.xi_c * sdiv.comp(i).values()[k] / rho;
        }
        let f = RealField::new(state.grid().clone(), vals, crate::field::Role::VectorComponent)?;
        comps.push(ops::dealias(&f.to_spectrum()).to_real()?);
    }
    VectorField::new(comps)
}

/// Skew-symmetric transport `u . grad f` as
/// `(P(u. grad f) + Div P(u f) - P(f Div u)) / 2`; combined with the
/// compression term this keeps the discrete mass integral exactly constant.
fn transport_skew(
    u_phys: &[RealField],
    grad_f: &[RealField],
    f_phys: &RealField,
    div_u: &RealField,
    dealias: bool,
) -> Result<Spectrum> {
    let g = f_phys.grid().clone();
    let dim = g.dim();
    let n = g.len();
    let mut adv = vec![0.0f64; n];
    for j in 0..dim {
        for ((acc, uv), gv) in adv.iter_mut().zip(u_phys[j].values()).zip(grad_f[j].values()) {
            *acc += uv * gv;
        }
    }
    let adv = RealField::new(g.clone(), adv, crate::field::Role::Scalar)?;
    let fdiv = f_phys.mul_pointwise(div_u)?;
    let uf: Vec<RealField> =
        (0..dim).map(|j| f_phys.mul_pointwise(&u_phys[j])).collect::<Result<_>>()?;
    let mut batch = vec![adv, fdiv];
    batch.extend(uf);
    let mut spectra = batch_to_spectrum(&batch, dealias);
    let uf_spec = spectra.split_off(2);
    let mut flux = Spectrum::zeros(g);
    for (j, s) in uf_spec.iter().enumerate() {
        flux = flux.add(&ops::derivative(s, j))?;
    }
    Ok(spectra[0].add(&flux)?.sub(&spectra[1])?.scale(0.5))
}

/// Full-system right-hand side in the physical variables:
/// `(drho, du, dd)` with the momentum equation divided through by `rho`.
pub fn rhs_full(state: &LCState, p: &LCParams) -> Result<(RealField, VectorField, VectorField)> {
    let min_rho = state.rho.min();
    if min_rho < DENSITY_FLOOR {
        return Err(Error::DensityFloor { min_rho, time: f64::NAN });
    }
    let g = state.grid().clone();
    let dim = g.dim();
    let npts = g.len();

    let u_spec: Vec<Spectrum> = (0..dim).map(|i| state.u.comp(i).to_spectrum()).collect();
    let rho_spec = state.rho.to_spectrum();
    let grad_rho = VectorField::new(batch_to_real(
        &(0..dim).map(|ax| ops::derivative(&rho_spec, ax)).collect::<Vec<_>>(),
    )?)?;
    let mut div_u_spec = Spectrum::zeros(g.clone());
    for (ax, us) in u_spec.iter().enumerate() {
        div_u_spec = div_u_spec.add(&ops::derivative(us, ax))?;
    }
    let div_u = div_u_spec.to_real()?;

    // mass: drho = -(skew transport + P(rho Div u))
    let transport = transport_skew(state.u.comps(), grad_rho.comps(), &state.rho, &div_u, true)?;
    let rho_divu = ops::dealiased_product_spectrum(&state.rho, &div_u)?;
    let drho = transport.add(&rho_divu)?.scale(-1.0).to_real()?;

    // momentum: du = P((A u - grad P - xi_c Div S)/rho) - P(u . grad u)
    let au = VectorField::new(batch_to_real(&operator_a_spectra(&u_spec, p))?)?;
    let p_phys = pressure(&state.rho, p.pressure_law)?;
    let p_spec = ops::dealias(&p_phys.to_spectrum());
    let grad_p = VectorField::new(batch_to_real(
        &(0..dim).map(|ax| ops::derivative(&p_spec, ax)).collect::<Vec<_>>(),
    )?)?;
    let sdiv = stress_div(&state.d)?;
    let grad_u: Vec<Vec<RealField>> = {
        let spectra: Vec<Spectrum> = u_spec
            .iter()
            .flat_map(|us| (0..dim).map(move |j| ops::derivative(us, j)))
            .collect();
        batch_to_real(&spectra)?.chunks(dim).map(|c| c.to_vec()).collect()
    };
    let mut du = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut vals = vec![0.0f64; npts];
        for (k, v) in vals.iter_mut().enumerate() {
            let rho = state.rho.values()[k];
            let force = au.comp(i).values()[k]
                - grad_p.comp(i).values()[k]
                - p.xi_c * sdiv.comp(i).values()[k];
            let mut conv = 0.0;
            for j in 0..dim {
                conv += state.u.comp(j).values()[k] * grad_u[i][j].values()[k];
            }
            *v = force / rho - conv;
        }
        let f = RealField::new(g.clone(), vals, crate::field::Role::VectorComponent)?;
        du.push(ops::dealias(&f.to_spectrum()).to_real()?);
    }
    let du = VectorField::new(du)?;

    // director: dd = theta (Laplace d + |grad d|^2 d) - u . grad d
    let d_spec: Vec<Spectrum> = state.d.comps().iter().map(|c| c.to_spectrum()).collect();
    let dd = director_rhs(&d_spec, &state.d, state.u.comps(), p.theta, true)?;

    Ok((drho, du, dd))
}

/// `theta (Laplace d + |grad d|^2 d) - u . grad d` for every director
/// component.
fn director_rhs(
    d_spec: &[Spectrum],
    d_phys: &VectorField,
    u_phys: &[RealField],
    theta: f64,
    dealias: bool,
) -> Result<VectorField> {
    let g = d_phys.grid().clone();
    let dim = g.dim();
    let n = g.len();
    let grads = director_gradient(d_spec, dim)?;
    let mut gsq = vec![0.0f64; n];
    for row in &grads {
        for comp in row {
            for (acc, v) in gsq.iter_mut().zip(comp.values()) {
                *acc += v * v;
            }
        }
    }
    let mut comps = Vec::with_capacity(d_spec.len());
    for (m, dm) in d_spec.iter().enumerate() {
        let mut vals = vec![0.0f64; n];
        for (k, v) in vals.iter_mut().enumerate() {
            let mut conv = 0.0;
            for j in 0..dim {
                conv += u_phys[j].values()[k] * grads[m][j].values()[k];
            }
            *v = theta * gsq[k] * d_phys.comp(m).values()[k] - conv;
        }
        let f = RealField::new(g.clone(), vals, crate::field::Role::VectorComponent)?;
        let nl = if dealias { ops::dealias(&f.to_spectrum()) } else { f.to_spectrum() };
        let total = ops::laplacian(dm).scale(theta).add(&nl)?;
        comps.push(total.to_real()?);
    }
    VectorField::new(comps)
}

/// Convert a physical state to the reformulated variables. The (conserved)
/// velocity mean is dropped by the Helmholtz split.
pub fn state_to_reform(state: &LCState) -> Result<ReformState> {
    let a = state.rho.add_scalar(-1.0);
    let (h, omega) = helmholtz::decompose(&state.u)?;
    Ok(ReformState { a, h, omega, d: state.d.clone() })
}

/// Convert back; fails if `a <= -1` anywhere.
pub fn reform_to_state(r: &ReformState) -> Result<LCState> {
    let min_a = r.a.min();
    if min_a <= -1.0 {
        return Err(Error::NonPositiveDensity(1.0 + min_a));
    }
    let rho = r.a.add_scalar(1.0);
    let u = helmholtz::recompose(&r.h, &r.omega)?;
    Ok(LCState { rho, u, d: r.d.clone() })
}

/// Total energy
/// `int rho |u|^2/2 + (P(rho) - P(1) - P'(1)(rho-1)) + xi_c |grad d|^2/2`.
pub fn energy(state: &LCState, p: &LCParams) -> Result<f64> {
    let g = state.grid();
    let dim = g.dim();
    let n = g.len();
    let d_spec: Vec<Spectrum> = state.d.comps().iter().map(|c| c.to_spectrum()).collect();
    let grads = director_gradient(&d_spec, dim)?;
    let mut total = 0.0f64;
    for k in 0..n {
        let rho = state.rho.values()[k];
        let mut usq = 0.0;
        for j in 0..dim {
            let v = state.u.comp(j).values()[k];
            usq += v * v;
        }
        let mut gsq = 0.0;
        for row in &grads {
            for comp in row {
                let v = comp.values()[k];
                gsq += v * v;
            }
        }
        total += 0.5 * rho * usq + pressure_deviation(rho, p.pressure_law) + 0.5 * p.xi_c * gsq;
    }
    Ok(total * g.volume() / n as f64)
}

/// Spectral representation of a reformulated state; the solver's working
/// form. `d` always keeps three components, `omega` is `dim x dim`.
#[derive(Debug, Clone)]
pub struct SpectralReform {
    pub a: Spectrum,
    pub h: Spectrum,
    pub omega: Vec<Vec<Spectrum>>,
    pub d: Vec<Spectrum>,
}

impl SpectralReform {
    pub fn from_state(r: &ReformState) -> Self {
        let dim = r.grid().dim();
        SpectralReform {
            a: r.a.to_spectrum(),
            h: r.h.to_spectrum(),
            omega: (0..dim)
                .map(|i| (0..dim).map(|j| r.omega.comp(i, j).to_spectrum()).collect())
                .collect(),
            d: r.d.comps().iter().map(|c| c.to_spectrum()).collect(),
        }
    }

    pub fn to_state(&self) -> Result<ReformState> {
        let dim = self.grid().dim();
        let a = self.a.to_real()?;
        let h = self.h.to_real()?;
        let mut rows = Vec::with_capacity(dim);
        for i in 0..dim {
            let row: Result<Vec<RealField>> =
                (0..dim).map(|j| self.omega[i][j].to_real()).collect();
            rows.push(row?);
        }
        let d: Result<Vec<RealField>> = self.d.iter().map(|s| s.to_real()).collect();
        Ok(ReformState { a, h, omega: MatrixField::new(rows)?, d: VectorField::new(d?)? })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.a.grid()
    }

    /// Velocity spectra reconstructed from `(h, Omega)`.
    pub fn velocity_spectra(&self) -> Result<Vec<Spectrum>> {
        helmholtz::recompose_spectra(&self.h, &self.omega)
    }

    pub fn add(&self, other: &SpectralReform) -> Result<SpectralReform> {
        Ok(SpectralReform {
            a: self.a.add(&other.a)?,
            h: self.h.add(&other.h)?,
            omega: self
                .omega
                .iter()
                .zip(&other.omega)
                .map(|(ra, rb)| {
                    ra.iter().zip(rb).map(|(x, y)| x.add(y)).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
            d: self
                .d
                .iter()
                .zip(&other.d)
                .map(|(x, y)| x.add(y))
                .collect::<Result<Vec<_>>>()?,
        })
    }

    pub fn sub(&self, other: &SpectralReform) -> Result<SpectralReform> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> SpectralReform {
        SpectralReform {
            a: self.a.scale(s),
            h: self.h.scale(s),
            omega: self.omega.iter().map(|row| row.iter().map(|x| x.scale(s)).collect()).collect(),
            d: self.d.iter().map(|x| x.scale(s)).collect(),
        }
    }

    /// L2 norm over all components (diagnostic).
    pub fn l2_norm(&self) -> f64 {
        let mut s = self.a.l2_norm().powi(2) + self.h.l2_norm().powi(2);
        for row in &self.omega {
            for x in row {
                s += x.l2_norm().powi(2);
            }
        }
        for x in &self.d {
            s += x.l2_norm().powi(2);
        }
        s.sqrt()
    }
}

/// Explicit (transport + nonlinear) part of the reformulated right-hand
/// side; the stiff linear block is handled separately by the integrator.
pub fn explicit_rhs(state: &SpectralReform, p: &LCParams, dealias: bool) -> Result<SpectralReform> {
    let g = state.grid().clone();
    let dim = g.dim();
    let npts = g.len();

    // spectral preliminaries
    let u_spec = state.velocity_spectra()?;
    let au_spec = operator_a_spectra(&u_spec, p);
    let mut div_u_spec = Spectrum::zeros(g.clone());
    for (ax, us) in u_spec.iter().enumerate() {
        div_u_spec = div_u_spec.add(&ops::derivative(us, ax))?;
    }
    let grad_a_spec: Vec<Spectrum> = (0..dim).map(|ax| ops::derivative(&state.a, ax)).collect();
    let grad_u_spec: Vec<Spectrum> =
        u_spec.iter().flat_map(|us| (0..dim).map(move |j| ops::derivative(us, j))).collect();
    let grad_d_spec: Vec<Spectrum> =
        state.d.iter().flat_map(|dm| (0..dim).map(move |j| ops::derivative(dm, j))).collect();

    // one batched inverse pass
    let nd = state.d.len();
    let mut batch: Vec<Spectrum> = Vec::new();
    batch.extend(u_spec.iter().cloned());
    batch.push(state.a.clone());
    batch.push(div_u_spec);
    batch.extend(au_spec);
    batch.extend(grad_a_spec);
    batch.extend(grad_u_spec);
    batch.extend(grad_d_spec);
    batch.extend(state.d.iter().cloned());
    let phys = batch_to_real(&batch)?;

    let u_phys = &phys[0..dim];
    let a_phys = &phys[dim];
    let div_u = &phys[dim + 1];
    let au_phys = &phys[dim + 2..2 * dim + 2];
    let grad_a = &phys[2 * dim + 2..3 * dim + 2];
    let gu0 = 3 * dim + 2;
    let grad_u: Vec<&[RealField]> =
        (0..dim).map(|i| &phys[gu0 + i * dim..gu0 + (i + 1) * dim]).collect();
    let gd0 = gu0 + dim * dim;
    let grad_d: Vec<Vec<RealField>> =
        phys[gd0..gd0 + nd * dim].chunks(dim).map(|c| c.to_vec()).collect();
    let d_phys = &phys[gd0 + nd * dim..gd0 + nd * dim + nd];

    let min_rho = 1.0 + a_phys.min();
    if min_rho < DENSITY_FLOOR {
        return Err(Error::DensityFloor { min_rho, time: f64::NAN });
    }

    // a-equation explicit terms: -(skew transport) - P(a Div u)
    let a_transport = transport_skew(u_phys, grad_a, a_phys, div_u, dealias)?;
    let a_divu = {
        let s = a_phys.mul_pointwise(div_u)?.to_spectrum();
        if dealias {
            ops::dealias(&s)
        } else {
            s
        }
    };
    let da = a_transport.add(&a_divu)?.scale(-1.0);

    // momentum nonlinearity N, then its Helmholtz projections
    let stress = stress_from_gradient(&grad_d, &g, dealias)?;
    let sdiv_spec: Vec<Spectrum> = (0..dim)
        .map(|i| {
            let mut acc = Spectrum::zeros(g.clone());
            for j in 0..dim {
                acc = acc.add(&ops::derivative(&stress.comp(i, j).to_spectrum(), j)).unwrap();
            }
            acc
        })
        .collect();
    let sdiv_phys = batch_to_real(&sdiv_spec)?;
    let mut n_fields = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut vals = vec![0.0f64; npts];
        for (k, v) in vals.iter_mut().enumerate() {
            let rho = 1.0 + a_phys.values()[k];
            let mut conv = 0.0;
            for j in 0..dim {
                conv += u_phys[j].values()[k] * grad_u[i][j].values()[k];
            }
            *v = -conv
                - (a_phys.values()[k] * au_phys[i].values()[k]
                    + p.xi_c * sdiv_phys[i].values()[k])
                    / rho;
        }
        n_fields.push(RealField::new(g.clone(), vals, crate::field::Role::VectorComponent)?);
    }
    let n_spec = batch_to_spectrum(&n_fields, dealias);
    let (dh, domega) = helmholtz::decompose_spectra(&n_spec)?;

    // director explicit terms: P(|grad d|^2 d - u . grad d)
    let mut gsq = vec![0.0f64; npts];
    for row in &grad_d {
        for comp in row {
            for (acc, v) in gsq.iter_mut().zip(comp.values()) {
                *acc += v * v;
            }
        }
    }
    let mut dd_fields = Vec::with_capacity(nd);
    for m in 0..nd {
        let mut vals = vec![0.0f64; npts];
        for (k, v) in vals.iter_mut().enumerate() {
            let mut conv = 0.0;
            for j in 0..dim {
                conv += u_phys[j].values()[k] * grad_d[m][j].values()[k];
            }
            *v = p.theta * gsq[k] * d_phys[m].values()[k] - conv;
        }
        dd_fields.push(RealField::new(g.clone(), vals, crate::field::Role::VectorComponent)?);
    }
    let dd = batch_to_spectrum(&dd_fields, dealias);

    Ok(SpectralReform { a: da, h: dh, omega: domega, d: dd })
}

/// Stiff linear part of the reformulated right-hand side:
/// `(-Lambda h, nu Laplace h + Lambda a, mu Laplace Omega, theta Laplace d)`.
pub fn linear_rhs(state: &SpectralReform, p: &LCParams) -> SpectralReform {
    let nu = p.nu();
    let da = ops::lambda_pow(&state.h, 1.0).scale(-1.0);
    let dh =
        ops::laplacian(&state.h).scale(nu).add(&ops::lambda_pow(&state.a, 1.0)).expect("same grid");
    let domega: Vec<Vec<Spectrum>> = state
        .omega
        .iter()
        .map(|row| row.iter().map(|s| ops::laplacian(s).scale(p.mu)).collect())
        .collect();
    let dd: Vec<Spectrum> = state.d.iter().map(|s| ops::laplacian(s).scale(p.theta)).collect();
    SpectralReform { a: da, h: dh, omega: domega, d: dd }
}

/// Full reformulated right-hand side `(da, dh, dOmega, dd)` as fields.
pub fn rhs_reformulated(
    r: &ReformState,
    p: &LCParams,
) -> Result<(RealField, RealField, MatrixField, VectorField)> {
    let spec = SpectralReform::from_state(r);
    let total = explicit_rhs(&spec, p, true)?.add(&linear_rhs(&spec, p))?;
    let out = total.to_state()?;
    Ok((out.a, out.h, out.omega, out.d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use std::f64::consts::TAU;

    fn grid2() -> Arc<Grid> {
        Grid::new(2, 32, TAU).unwrap()
    }

    fn params() -> LCParams {
        LCParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(LCParams::new(1.0, 1.0).is_ok());
        assert!(LCParams::new(0.0, 1.0).is_err());
        assert!(LCParams::new(1.0, -1.0).is_err()); // 2 - 3 < 0
        let p = LCParams::new(1.5, -0.5).unwrap(); // 3 - 1.5 >= 0
        assert!((p.nu() - 2.5).abs() < 1e-15);
        assert!(p.nu() >= 4.0 / 3.0 * p.mu);
    }

    #[test]
    fn pressure_values() {
        let g = grid2();
        let one = RealField::constant(g.clone(), 1.0);
        let two = RealField::constant(g.clone(), 2.0);
        assert!((pressure(&one, PressureLaw::Quadratic).unwrap().values()[0] - 0.5).abs() < 1e-15);
        assert!((pressure(&two, PressureLaw::Quadratic).unwrap().values()[0] - 2.0).abs() < 1e-15);
        assert!((dpressure(&two, PressureLaw::Quadratic).unwrap().values()[0] - 2.0).abs() < 1e-15);
        let bad = RealField::constant(g, -0.5);
        assert!(pressure(&bad, PressureLaw::Quadratic).is_err());
    }

    #[test]
    fn gradient_pressure_over_rho_is_curl_free() {
        // (1/rho) grad P(rho) = grad rho for the quadratic law
        let g = Grid::new(2, 64, TAU).unwrap();
        let a = synth::random_band_field(&g, 0.9, 4.0, &mut synth::rng(1)).unwrap();
        let rho = a.scale(0.2 / a.linf_norm()).add_scalar(1.0);
        let p_phys = pressure(&rho, PressureLaw::Quadratic).unwrap();
        let p_spec = p_phys.to_spectrum();
        let grad_p: Vec<RealField> =
            (0..2).map(|ax| ops::derivative(&p_spec, ax).to_real().unwrap()).collect();
        let inv_rho = rho.map(|r| 1.0 / r);
        let field = VectorField::new(
            grad_p.iter().map(|gp| gp.mul_pointwise(&inv_rho).unwrap()).collect(),
        )
        .unwrap();
        let c = ops::curl_mat(&field).unwrap();
        assert!(c.l2_norm() <= 1e-10 * (1.0 + field.l2_norm()));
    }

    #[test]
    fn stress_of_constant_director_vanishes() {
        let g = grid2();
        let d = Equilibrium::new([0.0, 0.0, 1.0]).unwrap().director(&g);
        let s = ericksen_stress(&d).unwrap();
        assert!(s.l2_norm() < 1e-13);
    }

    #[test]
    fn stress_trace_identity() {
        // trace(grad d (.) grad d) = |grad d|^2 pointwise, so in 2D
        // trace(stress) = |grad d|^2 - 2 * |grad d|^2 / 2 = 0
        let g = grid2();
        let mut rng = synth::rng(2);
        let comps: Vec<RealField> = (0..3)
            .map(|_| synth::random_band_field(&g, 0.9, 4.0, &mut rng).unwrap().scale(0.1))
            .collect();
        let d = VectorField::new(comps).unwrap();
        let s = ericksen_stress(&d).unwrap();
        let trace = s.comp(0, 0).add(s.comp(1, 1)).unwrap();
        assert!(trace.l2_norm() <= 1e-12 * (1.0 + d.l2_norm()));
    }

    #[test]
    fn planar_director_stress_oracle() {
        // d = (cos(ax), sin(ax), 0): grad d (.) grad d = diag(a^2, 0),
        // stress = diag(a^2/2, -a^2/2), Div stress = 0
        let g = Grid::new(2, 32, TAU).unwrap();
        let alpha = 2.0;
        let d = VectorField::new(vec![
            RealField::from_fn(g.clone(), |x| (alpha * x[0]).cos()),
            RealField::from_fn(g.clone(), |x| (alpha * x[0]).sin()),
            RealField::constant(g.clone(), 0.0),
        ])
        .unwrap();
        let s = ericksen_stress(&d).unwrap();
        let a2 = alpha * alpha;
        let c = |v: f64| RealField::constant(g.clone(), v);
        assert!(s.comp(0, 0).sub(&c(0.5 * a2)).unwrap().l2_norm() < 1e-10);
        assert!(s.comp(1, 1).sub(&c(-0.5 * a2)).unwrap().l2_norm() < 1e-10);
        assert!(s.comp(0, 1).l2_norm() < 1e-10);
        let sd = stress_div(&d).unwrap();
        assert!(sd.l2_norm() < 1e-10);
    }

    #[test]
    fn operator_a_on_special_fields() {
        let g = Grid::new(2, 32, TAU).unwrap();
        let p = params(); // mu = 1, lambda = 1, nu = 3
        // divergence-free single mode: A u = mu Laplace u = -|xi|^2 u
        let psi = RealField::from_fn(g.clone(), |x| (2.0 * x[0]).sin() * x[1].cos());
        let gr = ops::grad(&psi).unwrap();
        let udiv0 = VectorField::new(vec![gr.comp(1).clone(), gr.comp(0).scale(-1.0)]).unwrap();
        let xi2 = 5.0;
        let out = operator_a(&udiv0, &p).unwrap();
        let expect = udiv0.scale(-xi2 * p.mu);
        assert!(out.sub(&expect).unwrap().l2_norm() <= 1e-11 * expect.l2_norm());
        // gradient single mode: A u = -nu |xi|^2 u
        let ugrad =
            ops::grad(&RealField::from_fn(g.clone(), |x| (x[0] + 2.0 * x[1]).sin())).unwrap();
        let out2 = operator_a(&ugrad, &p).unwrap();
        let expect2 = ugrad.scale(-5.0 * p.nu());
        assert!(out2.sub(&expect2).unwrap().l2_norm() <= 1e-11 * expect2.l2_norm());
        // lambda + mu = 0 reduces A to mu Laplace exactly
        let p3 = LCParams { mu: 1.0, lambda: -1.0, ..params() };
        let mixed = VectorField::new(vec![
            RealField::from_fn(g.clone(), |x| (x[0] + x[1]).sin()),
            RealField::from_fn(g.clone(), |x| (2.0 * x[0]).cos()),
        ])
        .unwrap();
        let out3 = operator_a(&mixed, &p3).unwrap();
        let lap: Vec<RealField> = (0..2)
            .map(|i| ops::laplacian(&mixed.comp(i).to_spectrum()).to_real().unwrap())
            .collect();
        let expect3 = VectorField::new(lap).unwrap();
        assert!(out3.sub(&expect3).unwrap().l2_norm() <= 1e-12 * (1.0 + expect3.l2_norm()));
    }

    #[test]
    fn nonlinearity_reductions() {
        let g = grid2();
        let p = params();
        let eq = Equilibrium::new([0.0, 0.0, 1.0]).unwrap();
        // rho = 1, d constant: N = -u . grad u
        let mut rng = synth::rng(3);
        let u = synth::random_band_vector(&g, 2, 0.9, 4.0, &mut rng).unwrap();
        let u = u.scale(0.1 / u.max_magnitude());
        let state =
            LCState::new(RealField::constant(g.clone(), 1.0), u.clone(), eq.director(&g)).unwrap();
        let n = nonlinear_n(&state, &p).unwrap();
        let u_spec: Vec<Spectrum> = (0..2).map(|i| u.comp(i).to_spectrum()).collect();
        let mut expect = Vec::new();
        for i in 0..2 {
            let mut vals = vec![0.0; g.len()];
            for j in 0..2 {
                let gu = ops::derivative(&u_spec[i], j).to_real().unwrap();
                for (acc, (a, b)) in
                    vals.iter_mut().zip(u.comp(j).values().iter().zip(gu.values()))
                {
                    *acc -= a * b;
                }
            }
            expect.push(
                ops::dealias(
                    &RealField::new(g.clone(), vals, crate::field::Role::VectorComponent)
                        .unwrap()
                        .to_spectrum(),
                )
                .to_real()
                .unwrap(),
            );
        }
        let expect = VectorField::new(expect).unwrap();
        assert!(n.sub(&expect).unwrap().l2_norm() <= 1e-12 * (1.0 + expect.l2_norm()));

        // u = 0, rho = 1: N = -Div stress
        let mut d_comps = Vec::new();
        for c in 0..3 {
            let base = if c == 2 { 1.0 } else { 0.0 };
            let pert = synth::random_band_field(&g, 0.9, 3.0, &mut rng).unwrap();
            let pert = pert.scale(0.05 / pert.linf_norm());
            d_comps.push(pert.add_scalar(base));
        }
        let d = VectorField::new(d_comps).unwrap();
        let state2 = LCState {
            rho: RealField::constant(g.clone(), 1.0),
            u: VectorField::zeros(g.clone(), 2),
            d: d.clone(),
        };
        let n2 = nonlinear_n(&state2, &p).unwrap();
        let expect2 = stress_div(&d).unwrap().scale(-1.0);
        assert!(n2.sub(&expect2).unwrap().l2_norm() <= 1e-12 * (1.0 + expect2.l2_norm()));
    }

    #[test]
    fn density_floor_is_enforced() {
        let g = grid2();
        let p = params();
        let eq = Equilibrium::new([0.0, 0.0, 1.0]).unwrap();
        let state = LCState {
            rho: RealField::constant(g.clone(), 0.05),
            u: VectorField::zeros(g.clone(), 2),
            d: eq.director(&g),
        };
        assert!(matches!(nonlinear_n(&state, &p), Err(Error::DensityFloor { .. })));
        assert!(matches!(rhs_full(&state, &p), Err(Error::DensityFloor { .. })));
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_both_forms() {
        let g = grid2();
        let p = params();
        let eq = Equilibrium::new([0.0, 0.0, 1.0]).unwrap();
        let state = eq.state(&g);
        let (drho, du, dd) = rhs_full(&state, &p).unwrap();
        assert!(drho.l2_norm() < 1e-13);
        assert!(du.l2_norm() < 1e-13);
        assert!(dd.l2_norm() < 1e-13);
        let r = state_to_reform(&state).unwrap();
        let (da, dh, dom, ddr) = rhs_reformulated(&r, &p).unwrap();
        assert!(da.l2_norm() < 1e-13);
        assert!(dh.l2_norm() < 1e-13);
        assert!(dom.l2_norm() < 1e-13);
        assert!(ddr.l2_norm() < 1e-13);
    }

    #[test]
    fn mass_is_conserved_by_the_rhs() {
        let g = grid2();
        let p = params();
        let mut rng = synth::rng(5);
        let a = synth::random_band_field(&g, 0.9, 4.0, &mut rng).unwrap();
        let a = a.scale(0.05 / a.linf_norm());
        let u = synth::random_band_vector(&g, 2, 0.9, 4.0, &mut rng).unwrap();
        let u = u.scale(0.1 / u.max_magnitude());
        let eq = Equilibrium::new([1.0, 0.0, 0.0]).unwrap();
        let state = LCState { rho: a.add_scalar(1.0), u, d: eq.director(&g) };
        let (drho, _, _) = rhs_full(&state, &p).unwrap();
        assert!(drho.mean().abs() * g.volume() <= 1e-12);
    }

    #[test]
    fn director_identity_on_unit_sphere() {
        // for |d| = 1 on the grid: int d . (Laplace d + |grad d|^2 d) = 0
        // up to dealiasing error
        let g = Grid::new(2, 64, TAU).unwrap();
        let mut rng = synth::rng(6);
        let vx = synth::random_band_field(&g, 0.9, 3.0, &mut rng).unwrap();
        let vx = vx.scale(0.05 / vx.linf_norm());
        let vy = synth::random_band_field(&g, 0.9, 3.0, &mut rng).unwrap();
        let vy = vy.scale(0.05 / vy.linf_norm());
        let n = g.len();
        let mut comps = vec![vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            let x = vx.values()[k];
            let y = vy.values()[k];
            let norm = (x * x + y * y + 1.0).sqrt();
            comps[0][k] = x / norm;
            comps[1][k] = y / norm;
            comps[2][k] = 1.0 / norm;
        }
        let d = VectorField::new(
            comps
                .into_iter()
                .map(|v| RealField::new(g.clone(), v, crate::field::Role::VectorComponent).unwrap())
                .collect(),
        )
        .unwrap();
        let state = LCState {
            rho: RealField::constant(g.clone(), 1.0),
            u: VectorField::zeros(g.clone(), 2),
            d: d.clone(),
        };
        let p = params();
        let (_, _, dd) = rhs_full(&state, &p).unwrap();
        let mut integral = 0.0;
        for m in 0..3 {
            integral += d.comp(m).inner(dd.comp(m)).unwrap();
        }
        assert!(integral.abs() <= 1e-8, "integral = {integral:.3e}");
    }

    #[test]
    fn n_is_invariant_under_constant_director_shift() {
        let g = grid2();
        let p = params();
        let mut rng = synth::rng(7);
        let u = synth::random_band_vector(&g, 2, 0.9, 4.0, &mut rng).unwrap();
        let u = u.scale(0.1 / u.max_magnitude());
        let a = synth::random_band_field(&g, 0.9, 4.0, &mut rng).unwrap();
        let a = a.scale(0.05 / a.linf_norm());
        let eq = Equilibrium::new([0.0, 1.0, 0.0]).unwrap();
        let mut d_comps = Vec::new();
        for c in 0..3 {
            let base = eq.d_hat[c];
            let pert = synth::random_band_field(&g, 0.9, 3.0, &mut rng).unwrap();
            let pert = pert.scale(0.02 / pert.linf_norm());
            d_comps.push(pert.add_scalar(base));
        }
        let d = VectorField::new(d_comps).unwrap();
        let state = LCState { rho: a.add_scalar(1.0), u: u.clone(), d: d.clone() };
        let n1 = nonlinear_n(&state, &p).unwrap();
        let shifted = VectorField::new(
            (0..3).map(|c| d.comp(c).add_scalar(-eq.d_hat[c]).add_scalar(eq.d_hat[c])).collect(),
        )
        .unwrap();
        let state2 = LCState { rho: state.rho.clone(), u, d: shifted };
        let n2 = nonlinear_n(&state2, &p).unwrap();
        for i in 0..2 {
            assert_eq!(n1.comp(i).values(), n2.comp(i).values());
        }
    }

    #[test]
    fn reform_round_trip() {
        let g = grid2();
        let mut rng = synth::rng(8);
        let eq = Equilibrium::new([0.0, 0.0, 1.0]).unwrap();
        for _ in 0..5 {
            let a = synth::random_band_field(&g, 0.9, 4.0, &mut rng).unwrap();
            let a = a.scale(0.05 / a.linf_norm());
            let u = synth::random_band_vector(&g, 2, 0.9, 4.0, &mut rng).unwrap();
            let u = u.scale(0.1 / u.max_magnitude());
            let mut d_comps = Vec::new();
            for c in 0..3 {
                let pert = synth::random_band_field(&g, 0.9, 3.0, &mut rng).unwrap();
                let pert = pert.scale(0.02 / pert.linf_norm());
                d_comps.push(pert.add_scalar(eq.d_hat[c]));
            }
            let state =
                LCState { rho: a.add_scalar(1.0), u, d: VectorField::new(d_comps).unwrap() };
            let r = state_to_reform(&state).unwrap();
            let back = reform_to_state(&r).unwrap();
            assert!(state.rho.sub(&back.rho).unwrap().l2_norm() <= 1e-12);
            assert!(state.u.sub(&back.u).unwrap().l2_norm() <= 1e-10 * state.u.l2_norm());
            assert!(state.d.sub(&back.d).unwrap().l2_norm() <= 1e-12);
        }
        // equilibrium maps to all-zero reform fields
        let r0 = state_to_reform(&eq.state(&g)).unwrap();
        assert!(r0.a.l2_norm() < 1e-13);
        assert!(r0.h.l2_norm() < 1e-13);
        assert!(r0.omega.l2_norm() < 1e-13);
        // gradient-only velocity maps to omega = 0
        let phi = RealField::from_fn(g.clone(), |x| (x[0] + x[1]).sin());
        let ugrad = ops::grad(&phi).unwrap();
        let st =
            LCState { rho: RealField::constant(g.clone(), 1.0), u: ugrad, d: eq.director(&g) };
        let rg = state_to_reform(&st).unwrap();
        assert!(rg.omega.l2_norm() <= 1e-12);
    }

    #[test]
    fn rejects_vacuum_conversion() {
        let g = grid2();
        let eq = Equilibrium::new([0.0, 0.0, 1.0]).unwrap();
        let r = ReformState {
            a: RealField::constant(g.clone(), -1.5),
            h: RealField::zeros(g.clone()),
            omega: MatrixField::zeros(g.clone(), 2),
            d: eq.director(&g),
        };
        assert!(reform_to_state(&r).is_err());
    }

    #[test]
    fn energy_values() {
        let g = Grid::new(2, 32, TAU).unwrap();
        let p = params();
        let eq = Equilibrium::new([0.0, 0.0, 1.0]).unwrap();
        assert!(energy(&eq.state(&g), &p).unwrap().abs() < 1e-14);
        // pure director twist d = (cos(ax), sin(ax), 0): energy = a^2/2 * vol
        let alpha = 2.0;
        let d = VectorField::new(vec![
            RealField::from_fn(g.clone(), |x| (alpha * x[0]).cos()),
            RealField::from_fn(g.clone(), |x| (alpha * x[0]).sin()),
            RealField::constant(g.clone(), 0.0),
        ])
        .unwrap();
        let st = LCState {
            rho: RealField::constant(g.clone(), 1.0),
            u: VectorField::zeros(g.clone(), 2),
            d,
        };
        let e = energy(&st, &p).unwrap();
        let expect = 0.5 * alpha * alpha * g.volume();
        assert!((e - expect).abs() <= 1e-10 * expect);
    }

    #[test]
    fn energy_is_quadratic_in_amplitude() {
        let g = grid2();
        let p = params();
        let eq = Equilibrium::new([0.0, 0.0, 1.0]).unwrap();
        let mut rng = synth::rng(9);
        let a0 = synth::random_band_field(&g, 0.9, 4.0, &mut rng).unwrap();
        let u0 = synth::random_band_vector(&g, 2, 0.9, 4.0, &mut rng).unwrap();
        let v0 = synth::random_band_vector(&g, 3, 0.9, 3.0, &mut rng).unwrap();
        let energy_at = |eps: f64| {
            let n = g.len();
            let mut comps = vec![vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for k in 0..n {
                let mut d = [0.0f64; 3];
                for (c, dc) in d.iter_mut().enumerate() {
                    *dc = eq.d_hat[c] + eps * v0.comp(c).values()[k];
                }
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                for c in 0..3 {
                    comps[c][k] = d[c] / norm;
                }
            }
            let d = VectorField::new(
                comps
                    .into_iter()
                    .map(|v| {
                        RealField::new(g.clone(), v, crate::field::Role::VectorComponent).unwrap()
                    })
                    .collect(),
            )
            .unwrap();
            let st = LCState { rho: a0.scale(eps).add_scalar(1.0), u: u0.scale(eps), d };
            energy(&st, &p).unwrap()
        };
        let eps = 1e-3;
        let ratio = energy_at(2.0 * eps) / energy_at(eps);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }
}
