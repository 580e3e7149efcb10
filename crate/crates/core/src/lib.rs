//! Numerical engine for K-P sub-Riemannian time-optimal control on SU(n).
//!
//! * [`numerics`]: complex matrices, matrix exponential, RK4, seeded RNG.
//! * [`lie`]: su(n), the AIII Cartan split, conjugation and isotropy.
//! * [`geodesic`]: the closed-form optimal geodesics `e^{At} e^{(P-A)t}`,
//!   horizontality and sub-Riemannian length.
//! * [`quotient`]: the SU(2)/K disc chart, its metric, Christoffel symbols,
//!   curvature, geodesic flow and the horizontal lift back to SU(2).
//! * [`cut_locus`]: singular-hit detection, distance sweeps, non-intersection
//!   and convexity checks, and the cut-locus report.
//! * [`io`] and [`cli`]: file formats and the `kpsr` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cut_locus;
pub mod error;
pub mod geodesic;
pub mod io;
pub mod lie;
pub mod numerics;
pub mod optim;
pub mod par;
pub mod quotient;

pub use error::{Error, Result, Subspace};
pub use geodesic::{CurveSamples, GeodesicSpec};
pub use lie::{AlgebraElement, GroupElement, KpDecomposition};
pub use par::Execution;
pub use quotient::{DiscPoint, DiscSample, DiscTangent};
