//! Closed-form K-P geodesics `X(t) = e^{At} e^{(P-A)t}` and their controls
//! `e^{At} P e^{-At}`, plus finite-difference horizontality and length.
//!
//! Velocities are right-trivialized throughout: a curve `gamma` moves with
//! `gamma' gamma^{-1}`, matching `X' = (sum u_j B_j) X`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Subspace};
use crate::lie::{AlgebraElement, Conjugate, GroupElement, KpDecomposition};
use crate::numerics::{c, mat_exp, uniform_grid, CMat};
use crate::par::{self, Execution};
use crate::quotient::{self, DiscPoint};

/// Subspace membership tolerance for A and P, relative to their norms.
pub const SUBSPACE_TOL: f64 = 1e-12;
/// Horizontality residual above which a length is flagged.
pub const HORIZONTALITY_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GeodesicSpec {
    dec: Arc<KpDecomposition>,
    a: AlgebraElement,
    p: AlgebraElement,
    t_max: f64,
    dt: f64,
    drift: CMat,
}

impl GeodesicSpec {
    pub fn new(
        dec: Arc<KpDecomposition>,
        a: AlgebraElement,
        p: AlgebraElement,
        t_max: f64,
        dt: f64,
    ) -> Result<Self> {
        for x in [&a, &p] {
            if x.n() != dec.n() {
                return Err(Error::DimensionMismatch {
                    expected: dec.n(),
                    found: x.n(),
                });
            }
        }
        dec.ensure_in(&a, Subspace::K, SUBSPACE_TOL)?;
        dec.ensure_in(&p, Subspace::P, SUBSPACE_TOL)?;
        if !(t_max >= 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_max must be >= 0, got {t_max}"
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        let drift = p.matrix() - a.matrix();
        Ok(Self {
            dec,
            a,
            p,
            t_max,
            dt,
            drift,
        })
    }

    /// Same geodesic with `P` rescaled to unit Killing norm (unit speed).
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.dec.norm(&self.p);
        if norm == 0.0 {
            return Err(Error::InvalidParameter("cannot normalize P = 0".into()));
        }
        Self::new(
            self.dec.clone(),
            self.a.clone(),
            self.p.scaled(1.0 / norm),
            self.t_max,
            self.dt,
        )
    }

    pub fn with_horizon(&self, t_max: f64, dt: f64) -> Result<Self> {
        Self::new(self.dec.clone(), self.a.clone(), self.p.clone(), t_max, dt)
    }

    pub fn decomposition(&self) -> &Arc<KpDecomposition> {
        &self.dec
    }

    pub fn a(&self) -> &AlgebraElement {
        &self.a
    }

    pub fn p(&self) -> &AlgebraElement {
        &self.p
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Constant sub-Riemannian speed `sqrt<P|P>`.
    pub fn speed(&self) -> f64 {
        self.dec.norm(&self.p)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.t_max.max(1.0);
        if !(t >= -slack && t <= self.t_max + slack) {
            return Err(Error::OutOfRange {
                what: "t",
                value: t,
                min: 0.0,
                max: self.t_max,
            });
        }
        Ok(())
    }

    pub fn point(&self, t: f64) -> Result<GroupElement> {
        self.check_time(t)?;
        Ok(self.point_unchecked(t))
    }

    /// The closed form at any real `t`, ignoring `t_max`.
    pub fn point_unchecked(&self, t: f64) -> GroupElement {
        let left = mat_exp(self.a.matrix(), t).expect("validated square");
        let right = mat_exp(&self.drift, t).expect("validated square");
        GroupElement::from_trusted(left * right)
    }

    pub fn control(&self, t: f64) -> Result<AlgebraElement> {
        self.check_time(t)?;
        Ok(self.control_unchecked(t))
    }

    pub fn control_unchecked(&self, t: f64) -> AlgebraElement {
        let e = mat_exp(self.a.matrix(), t).expect("validated square");
        let m = &e * self.p.matrix() * e.adjoint();
        AlgebraElement::project(&m).expect("square")
    }

    pub fn sample(&self) -> Result<CurveSamples> {
        let times = uniform_grid(0.0, self.t_max, self.dt)?;
        let points = times.iter().map(|&t| self.point_unchecked(t)).collect();
        CurveSamples::new(times, points)
    }

    /// The geodesic for `(k A k^{-1}, k P k^{-1})`.
    pub fn conjugated(&self, k: &GroupElement) -> Result<Self> {
        Self::new(
            self.dec.clone(),
            self.a.conjugated_by(k)?,
            self.p.conjugated_by(k)?,
            self.t_max,
            self.dt,
        )
    }
}

pub fn geodesic_point(spec: &GeodesicSpec, t: f64) -> Result<GroupElement> {
    spec.point(t)
}

pub fn geodesic_control(spec: &GeodesicSpec, t: f64) -> Result<AlgebraElement> {
    spec.control(t)
}

pub fn sample_geodesic(spec: &GeodesicSpec) -> Result<CurveSamples> {
    spec.sample()
}

/// Samples many geodesics; output order follows input order.
pub fn sample_batch(specs: &[GeodesicSpec], exec: Execution) -> Vec<Result<CurveSamples>> {
    par::map(exec, specs, |s| s.sample())
}

/// Uniformly timed points of a group curve, with disc projections for SU(2).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSamples {
    pub times: Vec<f64>,
    pub points: Vec<GroupElement>,
    pub disc: Option<Vec<DiscPoint>>,
}

impl CurveSamples {
    pub fn new(times: Vec<f64>, points: Vec<GroupElement>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times for {} points",
                times.len(),
                points.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sample times must increase".into()));
        }
        let disc = match points.first() {
            Some(p) if p.n() == 2 => Some(
                points
                    .iter()
                    .map(quotient::project)
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        Ok(Self {
            times,
            points,
            disc,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Right-trivialized velocities `gamma' gamma^{-1}` by second-order
    /// (possibly non-uniform) finite differences, projected onto su(n).
    pub fn right_velocities(&self) -> Result<Vec<AlgebraElement>> {
        let n = self.len();
        if n < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                found: n,
            });
        }
        let t = &self.times;
        let x = |k: usize| self.points[k].matrix();
        let deriv = |k: usize| -> CMat {
            if n == 2 {
                return (x(1) - x(0)) * c(1.0 / (t[1] - t[0]), 0.0);
            }
            let (i0, i1, i2) = if k == 0 {
                (0, 1, 2)
            } else if k == n - 1 {
                (n - 3, n - 2, n - 1)
            } else {
                (k - 1, k, k + 1)
            };
            // Lagrange derivative at t[k] through three nodes
            let (a, b, cc) = (t[i0], t[i1], t[i2]);
            let s = t[k];
            let w0 = ((s - b) + (s - cc)) / ((a - b) * (a - cc));
            let w1 = ((s - a) + (s - cc)) / ((b - a) * (b - cc));
            let w2 = ((s - a) + (s - b)) / ((cc - a) * (cc - b));
            x(i0) * c(w0, 0.0) + x(i1) * c(w1, 0.0) + x(i2) * c(w2, 0.0)
        };
        (0..n)
            .map(|k| AlgebraElement::project(&(deriv(k) * x(k).adjoint())))
            .collect()
    }
}

/// Largest `|(gamma' gamma^{-1})_K|` over interior samples.
pub fn horizontality_residual(samples: &CurveSamples, dec: &KpDecomposition) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: samples.len(),
        });
    }
    let vel = samples.right_velocities()?;
    let mut worst: f64 = 0.0;
    for v in &vel[1..vel.len() - 1] {
        worst = worst.max(dec.subspace_residual(v, Subspace::P)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveLength {
    pub length: f64,
    pub horizontality_residual: f64,
    /// False when the residual exceeds the tolerance; the length is then
    /// the Riemannian length of a non-admissible curve.
    pub horizontal: bool,
}

pub fn curve_length(samples: &CurveSamples, dec: &KpDecomposition) -> Result<CurveLength> {
    curve_length_with_tol(samples, dec, HORIZONTALITY_TOL)
}

/// Trapezoidal integral of `sqrt<v|v>` with `v = gamma' gamma^{-1}`.
pub fn curve_length_with_tol(
    samples: &CurveSamples,
    dec: &KpDecomposition,
    tol: f64,
) -> Result<CurveLength> {
    if samples.len() < 2 {
        return Ok(CurveLength {
            length: 0.0,
            horizontality_residual: 0.0,
            horizontal: true,
        });
    }
    let vel = samples.right_velocities()?;
    let speeds: Vec<f64> = vel.iter().map(|v| dec.norm(v)).collect();
    let length = samples
        .times
        .windows(2)
        .zip(speeds.windows(2))
        .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
        .sum();
    let residual = if samples.len() >= 3 {
        horizontality_residual(samples, dec)?
    } else {
        dec.subspace_residual(&vel[0], Subspace::P)?
    };
    Ok(CurveLength {
        length,
        horizontality_residual: residual,
        horizontal: residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::make_aiii;
    use crate::numerics::{frobenius, from_rows, ONE, ZERO};
    use std::f64::consts::PI;

    fn su2() -> Arc<KpDecomposition> {
        Arc::new(make_aiii(2, 1, 0.5).unwrap())
    }

    fn rot() -> AlgebraElement {
        AlgebraElement::new(from_rows(&[vec![ZERO, ONE], vec![-ONE, ZERO]]).unwrap()).unwrap()
    }

    #[test]
    fn starts_at_identity() {
        let d = su2();
        let a = d.basis_k()[0].scaled(0.3);
        let s = GeodesicSpec::new(d, a, rot(), 1.0, 0.1).unwrap();
        assert!(s.point(0.0).unwrap().distance(&GroupElement::identity(2)) < 1e-15);
        assert_eq!(s.control(0.0).unwrap(), rot());
        assert!(s.point(1.5).is_err());
    }

    #[test]
    fn rejects_swapped_subspaces() {
        let d = su2();
        let err = GeodesicSpec::new(d.clone(), rot(), rot(), 1.0, 0.1).unwrap_err();
        assert!(matches!(
            err,
            Error::NotInSubspace {
                subspace: Subspace::K,
                ..
            }
        ));
        let k = d.basis_k()[0].clone();
        assert!(GeodesicSpec::new(d, AlgebraElement::zero(2), k, 1.0, 0.1).is_err());
    }

    #[test]
    fn half_turn_reaches_minus_identity() {
        let s = GeodesicSpec::new(su2(), AlgebraElement::zero(2), rot(), PI, 1e-3).unwrap();
        let c = s.sample().unwrap();
        assert_eq!(c.len(), 3143);
        let end = c.points.last().unwrap().matrix();
        assert!(frobenius(&(end + CMat::identity(2, 2))) < 1e-10);
        assert!(c.disc.is_some());
    }

    #[test]
    fn degenerate_sampling() {
        let s = GeodesicSpec::new(su2(), AlgebraElement::zero(2), rot(), 0.5, 0.5).unwrap();
        assert_eq!(s.sample().unwrap().len(), 2);
        let s = GeodesicSpec::new(su2(), AlgebraElement::zero(2), rot(), 0.0, 0.5).unwrap();
        let c = s.sample().unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(curve_length(&c, s.decomposition()).unwrap().length, 0.0);
        assert!(horizontality_residual(&c, s.decomposition()).is_err());
    }

    #[test]
    fn vertical_curve_is_flagged() {
        let d = su2();
        let a = d.basis_k()[0].scaled(0.7);
        let times = uniform_grid(0.0, 1.0, 1e-3).unwrap();
        let points = times.iter().map(|&t| a.exp(t)).collect();
        let c = CurveSamples::new(times, points).unwrap();
        let r = horizontality_residual(&c, &d).unwrap();
        assert!((r - a.norm_frobenius()).abs() < 1e-6, "{r}");
        assert!(!curve_length(&c, &d).unwrap().horizontal);
    }
}
