//! Pseudospectral laboratory for the compressible flow of nematic liquid
//! crystals on a periodic torus.
//!
//! The crate provides, bottom to top:
//!
//! * [`grid`], [`field`], [`ops`] — FFT-exact fields and differential
//!   operators, fractional Laplacian powers, 2/3-rule dealiasing;
//! * [`helmholtz`] — the split of a velocity field into a compressible
//!   potential `h` and an incompressible antisymmetric part `Omega`;
//! * [`lp`] — dyadic (Littlewood-Paley) frequency decomposition, homogeneous
//!   and hybrid Besov norms, and exact dyadic rescaling;
//! * [`system`] — the coupled density / velocity / director equations, their
//!   reformulation in `(rho - 1, h, Omega, d)` variables, pressure law and
//!   elastic stress;
//! * [`solver`] — IMEX time integration with exact per-mode treatment of the
//!   stiff linear blocks, linearized-system integrators, and the closed-form
//!   acoustic mode oracle;
//! * [`diagnostics`] — norm traces, the composite solution-space functional,
//!   per-block decay-rate fits and regime monitors;
//! * [`lab`] — configuration-driven experiments behind the `lclab` CLI.
//!
//! See the book under `book/` for a guided tour; its code snippets run as
//! doc-tests of this crate.

pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod helmholtz;
pub mod io;
pub mod lab;
pub mod lp;
pub mod ops;
pub mod solver;
pub mod synth;
pub mod system;

pub use error::{Error, Result};
pub use field::{MatrixField, RealField, Role, Spectrum, VectorField};
pub use grid::Grid;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields-and-transforms.md")]
    mod fields_and_transforms {}
    #[doc = include_str!("../../../book/src/dyadic-analysis.md")]
    mod dyadic_analysis {}
    #[doc = include_str!("../../../book/src/the-flow-system.md")]
    mod the_flow_system {}
    #[doc = include_str!("../../../book/src/time-integration.md")]
    mod time_integration {}
    #[doc = include_str!("../../../book/src/decay-diagnostics.md")]
    mod decay_diagnostics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
