//! Norm traces, composite solution-space functionals, decay-rate fits and
//! regime monitors.
//!
//! The composite functional of a trajectory `(a, u, d - d_hat)` at exponent
//! `s` combines three sup-in-time norms with three time-integrated norms:
//!
//! ```text
//! sup_t ||a||_{B~^{s-1,s}} + sup_t ||u||_{B^{s-1}} + sup_t ||d - d_hat||_{B~^{s-1,s}}
//! + int ||a||_{B~^{s+1,s}} + int ||u||_{B^{s+1}} + int ||d - d_hat||_{B~^{s+1,s+2}}
//! ```
//!
//! Suprema are taken over the sampled times and integrals by the trapezoid
//! rule on the snapshot cadence.

use crate::error::{Error, Result};
use crate::field::{RealField, VectorField};
use crate::lp::{besov_norm, hybrid_norm, BlockMasses, BlockSet, HybridSpec};
use crate::solver::linearized::LinearizedTrajectory;
use crate::solver::RunResult;
use crate::system::{director_deviation, LCState};
use serde::{Deserialize, Serialize};

/// Strictly increasing time series of a nonnegative functional with its
/// cumulative trapezoid integral.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Cumulative `int_0^t value ds`, same length as `times`.
    pub integral: Vec<f64>,
}

impl NormTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::MissingSnapshots(format!(
                "trace with {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::MissingSnapshots("times not strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite { context: "norm trace values", index: 0 });
        }
        let integral = cumulative_trapezoid(&times, &values);
        Ok(NormTrace { times, values, integral })
    }

    pub fn total_integral(&self) -> f64 {
        *self.integral.last().unwrap()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(times.len());
    let mut total = 0.0;
    acc.push(0.0);
    for i in 1..times.len() {
        total += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
        acc.push(total);
    }
    acc
}

/// Shell-mass time series to a norm trace.
pub fn norm_trace_hybrid(
    times: &[f64],
    blocks: &[BlockMasses],
    spec: &HybridSpec,
) -> Result<NormTrace> {
    let values = blocks.iter().map(|b| hybrid_norm(b, spec)).collect();
    NormTrace::new(times.to_vec(), values)
}

pub fn norm_trace_besov(times: &[f64], blocks: &[BlockMasses], s: f64) -> Result<NormTrace> {
    let values = blocks.iter().map(|b| besov_norm(b, s)).collect();
    NormTrace::new(times.to_vec(), values)
}

/// `V(t) = int_0^t ||u(s)||_{B^{5/2}} ds` from a sampled `B^{5/2}` trace.
pub fn v_of_t(u_trace: &NormTrace) -> NormTrace {
    NormTrace {
        times: u_trace.times.clone(),
        values: u_trace.integral.clone(),
        integral: cumulative_trapezoid(&u_trace.times, &u_trace.integral),
    }
}

/// The dyadic index separating low- and high-frequency treatment of the
/// acoustic pair: `q0 = log2(3/nu)`.
pub fn q0_threshold(nu: f64) -> f64 {
    (3.0 / nu).log2()
}

/// The six components of the composite trajectory functional and their sum.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrakBReport {
    pub s: f64,
    pub sup_density: f64,
    pub sup_velocity: f64,
    pub sup_director: f64,
    pub int_density: f64,
    pub int_velocity: f64,
    pub int_director: f64,
    pub total: f64,
}

impl FrakBReport {
    fn assemble(
        s: f64,
        sup: (f64, f64, f64),
        int: (f64, f64, f64),
    ) -> FrakBReport {
        FrakBReport {
            s,
            sup_density: sup.0,
            sup_velocity: sup.1,
            sup_director: sup.2,
            int_density: int.0,
            int_velocity: int.1,
            int_director: int.2,
            total: sup.0 + sup.1 + sup.2 + int.0 + int.1 + int.2,
        }
    }
}

/// Composite functional of a sampled trajectory at exponent `s`
/// (density blocks of `rho - 1`, velocity blocks of `u`, director blocks of
/// `d - d_hat`).
pub fn frak_b_norm(
    times: &[f64],
    a_blocks: &[BlockMasses],
    u_blocks: &[BlockMasses],
    d_blocks: &[BlockMasses],
    s: f64,
) -> Result<FrakBReport> {
    if times.len() != a_blocks.len() || times.len() != u_blocks.len()
        || times.len() != d_blocks.len()
        || times.is_empty()
    {
        return Err(Error::MissingSnapshots(format!(
            "trajectory with {} times, {}/{}/{} block samples",
            times.len(),
            a_blocks.len(),
            u_blocks.len(),
            d_blocks.len()
        )));
    }
    let sup_spec = HybridSpec::new(s - 1.0, s);
    let int_density_spec = HybridSpec::new(s + 1.0, s);
    let int_director_spec = HybridSpec::new(s + 1.0, s + 2.0);

    let a_sup = norm_trace_hybrid(times, a_blocks, &sup_spec)?;
    let u_sup = norm_trace_besov(times, u_blocks, s - 1.0)?;
    let d_sup = norm_trace_hybrid(times, d_blocks, &sup_spec)?;
    let a_int = norm_trace_hybrid(times, a_blocks, &int_density_spec)?;
    let u_int = norm_trace_besov(times, u_blocks, s + 1.0)?;
    let d_int = norm_trace_hybrid(times, d_blocks, &int_director_spec)?;

    Ok(FrakBReport::assemble(
        s,
        (a_sup.sup(), u_sup.sup(), d_sup.sup()),
        (a_int.total_integral(), u_int.total_integral(), d_int.total_integral()),
    ))
}

/// The running functional over every sampled prefix `[0, t_i]`.
pub fn frak_b_running(
    times: &[f64],
    a_blocks: &[BlockMasses],
    u_blocks: &[BlockMasses],
    d_blocks: &[BlockMasses],
    s: f64,
) -> Result<Vec<f64>> {
    let sup_spec = HybridSpec::new(s - 1.0, s);
    let int_density_spec = HybridSpec::new(s + 1.0, s);
    let int_director_spec = HybridSpec::new(s + 1.0, s + 2.0);
    let a_sup = norm_trace_hybrid(times, a_blocks, &sup_spec)?;
    let u_sup = norm_trace_besov(times, u_blocks, s - 1.0)?;
    let d_sup = norm_trace_hybrid(times, d_blocks, &sup_spec)?;
    let a_int = norm_trace_hybrid(times, a_blocks, &int_density_spec)?;
    let u_int = norm_trace_besov(times, u_blocks, s + 1.0)?;
    let d_int = norm_trace_hybrid(times, d_blocks, &int_director_spec)?;
    let mut out = Vec::with_capacity(times.len());
    let mut sups = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..times.len() {
        sups.0 = sups.0.max(a_sup.values[i]);
        sups.1 = sups.1.max(u_sup.values[i]);
        sups.2 = sups.2.max(d_sup.values[i]);
        out.push(
            sups.0 + sups.1 + sups.2 + a_int.integral[i] + u_int.integral[i] + d_int.integral[i],
        );
    }
    Ok(out)
}

/// Frequency regime of the mixed per-shell functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FqRegime {
    Low,
    High,
}

/// The mixed functional and its equivalence against the plain shell masses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MixedFq {
    pub fq_sq: f64,
    /// `||Delta_q a||^2 + ||Delta_q h||^2` (low) or
    /// `||Lambda Delta_q a||^2 + ||Delta_q h||^2` (high).
    pub reference: f64,
    pub ratio: f64,
    pub cross_term: f64,
}

/// Low regime: `f_q^2 = ||D_q a||^2 + ||D_q h||^2 -
/// (tau nu / 4)(Lambda D_q a | D_q h)` with `0 < tau <= 8/9`;
/// high regime: `f_q^2 = ||Lambda D_q a||^2 + (3/nu^2)||D_q h||^2 -
/// (2/nu)(Lambda D_q a | D_q h)`.
pub fn mixed_fq(
    a: &BlockSet,
    h: &BlockSet,
    q: i32,
    tau: f64,
    nu: f64,
    regime: FqRegime,
) -> Result<MixedFq> {
    if matches!(regime, FqRegime::Low) && !(tau > 0.0 && tau <= 8.0 / 9.0) {
        return Err(Error::TauOutOfRange(tau));
    }
    let da = a
        .block(q)
        .ok_or_else(|| Error::MissingSnapshots(format!("shell {q} outside window")))?;
    let dh = h
        .block(q)
        .ok_or_else(|| Error::MissingSnapshots(format!("shell {q} outside window")))?;
    let grid = da.grid();
    let vol = grid.volume();
    let mut na2 = 0.0;
    let mut nh2 = 0.0;
    let mut nlam_a2 = 0.0;
    let mut cross = 0.0;
    for flat in 0..grid.len() {
        let ca = da.coefficients()[flat];
        let ch = dh.coefficients()[flat];
        let xi = grid.xi_norm(flat);
        na2 += ca.norm_sqr();
        nh2 += ch.norm_sqr();
        nlam_a2 += xi * xi * ca.norm_sqr();
        cross += xi * (ca.conj() * ch).re;
    }
    na2 *= vol;
    nh2 *= vol;
    nlam_a2 *= vol;
    cross *= vol;
    let (fq_sq, reference, cross_term) = match regime {
        FqRegime::Low => {
            let c = tau * nu / 4.0 * cross;
            (na2 + nh2 - c, na2 + nh2, c)
        }
        FqRegime::High => {
            let c = 2.0 / nu * cross;
            (nlam_a2 + 3.0 / (nu * nu) * nh2 - c, nlam_a2 + nh2, c)
        }
    };
    let ratio = if reference > 0.0 { fq_sq / reference } else { 0.0 };
    Ok(MixedFq { fq_sq, reference, ratio, cross_term })
}

/// Least-squares exponential fit of a shell trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateFit {
    /// e-folding rate `r` in `m(t) ~ m(0) exp(-r t)` (positive = decay).
    pub rate: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub points: usize,
}

/// Fit window: samples with mass inside `[1e-10, 1e-2] * initial` (skips
/// both transients and floor noise), relaxed to everything at or below the
/// initial mass when the strict window is too thin.
fn window_bounds(times: &[f64], vals: &[f64]) -> Option<(f64, f64)> {
    let m0 = vals[0];
    if m0 <= 0.0 {
        return None;
    }
    let count = |lo: f64, hi: f64| {
        times.iter().zip(vals).skip(1).filter(|(_, v)| **v > lo * m0 && **v <= hi * m0).count()
    };
    if count(1e-10, 1e-2) >= 6 {
        Some((1e-10 * m0, 1e-2 * m0))
    } else {
        Some((1e-13 * m0, m0))
    }
}

/// Crest points of the contiguous trace: 3-point local maxima, exact
/// envelope samples of an oscillating exponential. Monotone traces have
/// none.
fn crest_points(times: &[f64], vals: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..vals.len().saturating_sub(1) {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] {
            out.push((times[i], vals[i]));
        }
    }
    out
}

/// Fit `log m = c - r t` over the mass window, through oscillation crests
/// when the trace has them.
pub fn fit_decay_rate(times: &[f64], vals: &[f64]) -> Result<RateFit> {
    let (lo, hi) = window_bounds(times, vals)
        .ok_or(Error::InsufficientSamples { have: 0, need: 3 })?;
    let in_window = |p: &(f64, f64)| p.1 > lo && p.1 <= hi;
    let window: Vec<(f64, f64)> =
        times.iter().zip(vals).skip(1).map(|(t, v)| (*t, *v)).filter(|p| in_window(p)).collect();
    if window.len() < 3 {
        return Err(Error::InsufficientSamples { have: window.len(), need: 3 });
    }
    let crests: Vec<(f64, f64)> =
        crest_points(times, vals).into_iter().filter(|p| in_window(p)).collect();
    let pts = if crests.len() >= 4 { crests } else { window };
    let n = pts.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (t, v) in &pts {
        let y = v.ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom <= 0.0 {
        return Err(Error::InsufficientSamples { have: pts.len(), need: 3 });
    }
    let slope = (n * sty - st * sy) / denom;
    let icept = (sy - slope * st) / n;
    let mut ss = 0.0;
    for (t, v) in &pts {
        let r = v.ln() - (icept + slope * t);
        ss += r * r;
    }
    Ok(RateFit { rate: -slope, residual: (ss / n).sqrt(), points: pts.len() })
}

/// Per-shell decay fit of a linearized trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockDecay {
    pub q: i32,
    pub regime: FqRegime,
    pub initial_first: f64,
    pub initial_second: f64,
    pub rate_first: Option<RateFit>,
    pub rate_second: Option<RateFit>,
}

/// Decay-rate fits per shell plus the high-frequency smoothing observable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DampingReport {
    pub q0: f64,
    pub rows: Vec<BlockDecay>,
    /// `sum_{q > q0} 2^{5q/2} int ||Delta_q h|| dt` (the two-derivative
    /// gain of `h` in the integrated norm).
    pub smoothing_integral: f64,
    /// `||vr_0||_{B~^{1/2,3/2}} + ||h_0||_{B^{1/2}}`, the reference mass the
    /// smoothing integral stays comparable to.
    pub initial_mass: f64,
}

/// Fit every shell with mass above `1e-12 * source` at `t = 0`.
pub fn damping_fit(traj: &LinearizedTrajectory, nu: f64) -> Result<DampingReport> {
    if traj.times.len() < 4 {
        return Err(Error::InsufficientSamples { have: traj.times.len(), need: 4 });
    }
    let q0 = q0_threshold(nu);
    let first0 = &traj.first_blocks[0];
    let second0 = &traj.second_blocks[0];
    let floor = 1e-12 * (first0.source_l2 + second0.source_l2);
    let mut rows = Vec::new();
    for (q, m0) in first0.shells() {
        let m0_second = second0.mass(q);
        if m0 <= floor && m0_second <= floor {
            continue;
        }
        let firsts: Vec<f64> = traj.first_blocks.iter().map(|b| b.mass(q)).collect();
        let seconds: Vec<f64> = traj.second_blocks.iter().map(|b| b.mass(q)).collect();
        let rate_first =
            if m0 > floor { fit_decay_rate(&traj.times, &firsts).ok() } else { None };
        let rate_second =
            if m0_second > floor { fit_decay_rate(&traj.times, &seconds).ok() } else { None };
        rows.push(BlockDecay {
            q,
            regime: if (q as f64) <= q0 { FqRegime::Low } else { FqRegime::High },
            initial_first: m0,
            initial_second: m0_second,
            rate_first,
            rate_second,
        });
    }
    // smoothing observable on the second component (h in the acoustic pair)
    let mut smoothing = 0.0;
    for (q, _) in second0.shells() {
        if (q as f64) <= q0 {
            continue;
        }
        let vals: Vec<f64> = traj.second_blocks.iter().map(|b| b.mass(q)).collect();
        let integral = cumulative_trapezoid(&traj.times, &vals);
        smoothing += (2.5 * q as f64).exp2() * integral.last().unwrap();
    }
    let initial_mass = hybrid_norm(first0, &HybridSpec::new(0.5, 1.5)) + besov_norm(second0, 0.5);
    Ok(DampingReport { q0, rows, smoothing_integral: smoothing, initial_mass })
}

/// Verdict of the near-equilibrium boundedness check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremVerdict {
    pub gamma: f64,
    /// Initial norm sum
    /// `||a_0||_{B~^{1/2,3/2}} + ||u_0||_{B^{1/2}} + ||d_0 - d_hat||_{B~^{1/2,3/2}}`.
    pub initial_norm: f64,
    /// Running composite functional per sampled prefix.
    pub running: Vec<f64>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Check `composite(T) <= Gamma * initial` for every sampled `T`.
pub fn theorem_bound_check(run: &RunResult, gamma: f64) -> Result<TheoremVerdict> {
    let n0 = hybrid_norm(&run.a_blocks[0], &HybridSpec::new(0.5, 1.5))
        + besov_norm(&run.u_blocks[0], 0.5)
        + hybrid_norm(&run.d_blocks[0], &HybridSpec::new(0.5, 1.5));
    let running =
        frak_b_running(&run.times, &run.a_blocks, &run.u_blocks, &run.d_blocks, 1.5)?;
    let worst = running.iter().fold(0.0f64, |m, v| m.max(*v));
    let max_ratio = if n0 > 0.0 { worst / n0 } else if worst > 0.0 { f64::INFINITY } else { 0.0 };
    Ok(TheoremVerdict {
        gamma,
        initial_norm: n0,
        running,
        max_ratio,
        pass: max_ratio <= gamma,
    })
}

/// Both sides of the time interpolation
/// `int ||f||^2_{B~^{3/2,5/2}} dt <= C sup ||f||_{B~^{1/2,3/2}} int ||f||_{B~^{5/2,7/2}} dt`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

pub fn interpolation_check(times: &[f64], blocks: &[BlockMasses]) -> Result<InterpolationReport> {
    let mid = norm_trace_hybrid(times, blocks, &HybridSpec::new(1.5, 2.5))?;
    let squared: Vec<f64> = mid.values.iter().map(|v| v * v).collect();
    let lhs = *cumulative_trapezoid(times, &squared).last().unwrap();
    let low = norm_trace_hybrid(times, blocks, &HybridSpec::new(0.5, 1.5))?;
    let high = norm_trace_hybrid(times, blocks, &HybridSpec::new(2.5, 3.5))?;
    let rhs = low.sup() * high.total_integral();
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(InterpolationReport { lhs, rhs, ratio })
}

/// Pointwise regime monitors `(max |rho - 1|, max ||d| - 1|, min rho)`.
pub fn deviation_monitors(state: &LCState) -> (f64, f64, f64) {
    let dev = state.rho.map(|r| (r - 1.0).abs()).linf_norm();
    let dir = director_deviation(&state.d);
    (dev, dir, state.rho.min())
}

/// Director monitors straight from a director field.
pub fn director_monitor(d: &VectorField) -> f64 {
    director_deviation(d)
}

/// `max |rho - 1|` of a density field.
pub fn density_deviation(rho: &RealField) -> f64 {
    rho.map(|r| (r - 1.0).abs()).linf_norm()
}
