//! SU(2)/K in the disc chart.
//!
//! A matrix `[[z, w], [-conj w, conj z]]` maps to `z = x + iy`. Interior
//! points are the regular orbits, the unit circle is the singular stratum
//! (diagonal matrices). With the inner product `-1/2 tr(PQ)` the quotient
//! metric is conformal, `g = delta / (1 - r^2)`, with curvature
//! `-2 / (1 - r^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{CurveSamples, GeodesicSpec};
use crate::lie::{AlgebraElement, GroupElement};
use crate::numerics::{self, c, from_rows, integrate_ode, rk4_step, uniform_grid};
use crate::par::{self, Execution};

/// Geodesics stop once `r^2 >= 1 - DEFAULT_BOUNDARY_EPS`.
pub const DEFAULT_BOUNDARY_EPS: f64 = 1e-6;
/// Offset used instead of starting at the singular point `(1, 0)`.
pub const DEFAULT_START_OFFSET: f64 = 1e-3;
/// Allowed distance between `project(q0)` and the first disc sample.
pub const LIFT_START_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscPoint {
    pub x: f64,
    pub y: f64,
}

impl DiscPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn r2(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn is_regular(&self) -> bool {
        self.r2() < 1.0
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn rotated(&self, phi: f64) -> Self {
        let (s, co) = phi.sin_cos();
        Self::new(co * self.x - s * self.y, s * self.x + co * self.y)
    }

    fn conformal_factor(&self) -> Result<f64> {
        let r2 = self.r2();
        if !(r2 < 1.0) {
            return Err(Error::SingularPoint { r2 });
        }
        Ok(1.0 / (1.0 - r2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscTangent {
    pub vx: f64,
    pub vy: f64,
}

impl DiscTangent {
    pub fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }

    pub fn rotated(&self, phi: f64) -> Self {
        let (s, co) = phi.sin_cos();
        Self::new(co * self.vx - s * self.vy, s * self.vx + co * self.vy)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.vx * k, self.vy * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientGeodesicState {
    pub point: DiscPoint,
    pub velocity: DiscTangent,
}

/// One record of a disc curve: time, position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscSample {
    pub t: f64,
    pub point: DiscPoint,
    pub velocity: DiscTangent,
}

fn require_su2(n: usize) -> Result<()> {
    if n != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: n,
        });
    }
    Ok(())
}

/// The (1,1) entry of an SU(2) matrix as a disc point.
pub fn project(x: &GroupElement) -> Result<DiscPoint> {
    require_su2(x.n())?;
    let z = x.matrix()[(0, 0)];
    Ok(DiscPoint::new(z.re, z.im))
}

/// `d/dt project(e^{t xi} x)` at `t = 0`, i.e. the (1,1) entry of `xi x`.
pub fn project_velocity(x: &GroupElement, xi: &AlgebraElement) -> Result<DiscTangent> {
    require_su2(x.n())?;
    let m = xi.matrix();
    let g = x.matrix();
    let dz = m[(0, 0)] * g[(0, 0)] + m[(0, 1)] * g[(1, 0)];
    Ok(DiscTangent::new(dz.re, dz.im))
}

pub fn metric_components(p: &DiscPoint) -> Result<[[f64; 2]; 2]> {
    let h = p.conformal_factor()?;
    Ok([[h, 0.0], [0.0, h]])
}

/// `g(v, v)` at `p`.
pub fn speed_squared(p: &DiscPoint, v: &DiscTangent) -> Result<f64> {
    Ok(p.conformal_factor()? * (v.vx * v.vx + v.vy * v.vy))
}

/// The unique `P` in the anti-diagonal subspace with
/// `d/dt project(e^{tP} q)|_0 = v`.
pub fn lift_tangent(q: &GroupElement, v: &DiscTangent) -> Result<AlgebraElement> {
    require_su2(q.n())?;
    let z = q.matrix()[(0, 0)];
    let w = q.matrix()[(0, 1)];
    let d = 1.0 - z.norm_sqr();
    // |w|^2 = 1 - |z|^2 on SU(2), so w vanishes exactly on the singular set
    if !(d > 0.0) || w.norm_sqr() < 1e-300 {
        return Err(Error::SingularFiber);
    }
    let (a, b) = (-w.re / d, -w.im / d);
    let (cc, dd) = (w.im / d, -w.re / d);
    let alpha = v.vx * a + v.vy * cc;
    let beta = v.vx * b + v.vy * dd;
    let m = from_rows(&[
        vec![numerics::ZERO, c(alpha, beta)],
        vec![c(-alpha, beta), numerics::ZERO],
    ])?;
    AlgebraElement::new(m)
}

/// Levi-Civita connection coefficients of `delta/(1 - r^2)`;
/// `x_xy` stands for `Gamma^x_{xy} = Gamma^x_{yx}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Christoffel {
    pub x_xx: f64,
    pub x_xy: f64,
    pub x_yy: f64,
    pub y_xx: f64,
    pub y_xy: f64,
    pub y_yy: f64,
}

impl Christoffel {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.x_xx, self.x_xy, self.x_yy, self.y_xx, self.y_xy, self.y_yy,
        ]
    }

    /// `-Gamma^i_{jk} v^j v^k`.
    pub fn acceleration(&self, v: &DiscTangent) -> DiscTangent {
        let (vx, vy) = (v.vx, v.vy);
        DiscTangent::new(
            -(self.x_xx * vx * vx + 2.0 * self.x_xy * vx * vy + self.x_yy * vy * vy),
            -(self.y_xx * vx * vx + 2.0 * self.y_xy * vx * vy + self.y_yy * vy * vy),
        )
    }
}

pub fn christoffel(p: &DiscPoint) -> Result<Christoffel> {
    let h = p.conformal_factor()?;
    let (x, y) = (p.x * h, p.y * h);
    Ok(Christoffel {
        x_xx: x,
        x_xy: y,
        x_yy: -x,
        y_xx: -y,
        y_xy: x,
        y_yy: y,
    })
}

pub fn sectional_curvature(p: &DiscPoint) -> Result<f64> {
    Ok(-2.0 * p.conformal_factor()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryHit {
    /// Time at which `r^2` reached `1 - eps_boundary`.
    pub time: f64,
    pub state: QuotientGeodesicState,
    /// Extrapolated arrival at `r = 1`: `time + asin(sqrt(1 - r^2)) / |v|_g`,
    /// exact for radial geodesics.
    pub boundary_time_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientGeodesic {
    pub samples: Vec<DiscSample>,
    /// Present when the geodesic reached the singular stratum; an expected
    /// outcome rather than a failure.
    pub boundary_hit: Option<BoundaryHit>,
}

impl QuotientGeodesic {
    pub fn last(&self) -> &DiscSample {
        self.samples.last().expect("geodesic holds its start")
    }
}

/// Right-hand side of the geodesic equation for the state `[x, y, vx, vy]`.
/// Outside the disc the values are meaningless but finite or infinite,
/// never a panic; callers reject such states.
pub fn geodesic_field(y: &[f64], dy: &mut [f64]) {
    let h = 1.0 / (1.0 - y[0] * y[0] - y[1] * y[1]);
    let g = Christoffel {
        x_xx: y[0] * h,
        x_xy: y[1] * h,
        x_yy: -y[0] * h,
        y_xx: -y[1] * h,
        y_xy: y[0] * h,
        y_yy: y[1] * h,
    };
    let a = g.acceleration(&DiscTangent::new(y[2], y[3]));
    dy[0] = y[2];
    dy[1] = y[3];
    dy[2] = a.vx;
    dy[3] = a.vy;
}

pub fn quotient_geodesic(
    start: &QuotientGeodesicState,
    t_max: f64,
    dt: f64,
) -> Result<QuotientGeodesic> {
    quotient_geodesic_with(start, t_max, dt, DEFAULT_BOUNDARY_EPS)
}

/// Integrates `x'' + Gamma(x', x') = 0` with RK4 until `t_max` or until
/// `r^2 >= 1 - eps_boundary`.
pub fn quotient_geodesic_with(
    start: &QuotientGeodesicState,
    t_max: f64,
    dt: f64,
    eps_boundary: f64,
) -> Result<QuotientGeodesic> {
    if !(start.point.r2() < 1.0 - eps_boundary) {
        return Err(Error::SingularPoint {
            r2: start.point.r2(),
        });
    }
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| geodesic_field(y, dy);
    let y0 = [
        start.point.x,
        start.point.y,
        start.velocity.vx,
        start.velocity.vy,
    ];
    let sol = integrate_ode(rhs, &y0, 0.0, t_max, dt, |y| {
        y[0] * y[0] + y[1] * y[1] < 1.0 - eps_boundary
    })?;
    let to_sample = |t: f64, y: &[f64]| DiscSample {
        t,
        point: DiscPoint::new(y[0], y[1]),
        velocity: DiscTangent::new(y[2], y[3]),
    };
    let samples: Vec<DiscSample> = sol.samples.iter().map(|s| to_sample(s.t, &s.y)).collect();
    let boundary_hit = sol.exit.map(|exit| {
        let s = to_sample(exit.last_valid.t, &exit.last_valid.y);
        let d = (1.0 - s.point.r2()).max(0.0);
        let speed =
            ((s.velocity.vx.powi(2) + s.velocity.vy.powi(2)) / d.max(f64::MIN_POSITIVE)).sqrt();
        let remaining = if speed > 0.0 {
            d.sqrt().min(1.0).asin() / speed
        } else {
            0.0
        };
        BoundaryHit {
            time: s.t,
            state: QuotientGeodesicState {
                point: s.point,
                velocity: s.velocity,
            },
            boundary_time_estimate: s.t + remaining,
        }
    });
    Ok(QuotientGeodesic {
        samples,
        boundary_hit,
    })
}

/// Integrates many quotient geodesics; output order follows input order.
pub fn quotient_geodesic_batch(
    starts: &[QuotientGeodesicState],
    t_max: f64,
    dt: f64,
    exec: Execution,
) -> Vec<Result<QuotientGeodesic>> {
    par::map(exec, starts, |s| quotient_geodesic(s, t_max, dt))
}

/// Cubic Hermite velocity at fraction `s` of an interval of length `h`.
fn hermite_velocity(a: &DiscSample, b: &DiscSample, s: f64, h: f64) -> DiscTangent {
    let dp = |p0: f64, v0: f64, p1: f64, v1: f64| {
        ((6.0 * s * s - 6.0 * s) * (p0 - p1)) / h
            + (3.0 * s * s - 4.0 * s + 1.0) * v0
            + (3.0 * s * s - 2.0 * s) * v1
    };
    DiscTangent::new(
        dp(a.point.x, a.velocity.vx, b.point.x, b.velocity.vx),
        dp(a.point.y, a.velocity.vy, b.point.y, b.velocity.vy),
    )
}

/// Horizontal lift of a disc curve through `q0`.
///
/// Solves `gamma' = P(t) gamma` with `P(t) = lift_tangent(gamma(t), v(t))`
/// by RK4 on the curve's own time grid; mid-interval velocities come from
/// the cubic Hermite interpolant of the samples.
pub fn lift_curve(curve: &[DiscSample], q0: &GroupElement) -> Result<CurveSamples> {
    require_su2(q0.n())?;
    let first = curve.first().ok_or(Error::TooFewSamples {
        needed: 1,
        found: 0,
    })?;
    if !first.point.is_regular() {
        return Err(Error::SingularPoint {
            r2: first.point.r2(),
        });
    }
    let start = project(q0)?;
    let distance = start.distance(&first.point);
    if distance > LIFT_START_TOL {
        return Err(Error::InitialPointMismatch { distance });
    }

    let mut state = numerics::realify(q0.matrix());
    let mut times = Vec::with_capacity(curve.len());
    let mut points = Vec::with_capacity(curve.len());
    times.push(first.t);
    points.push(q0.clone());

    for pair in curve.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let h = b.t - a.t;
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(
                "disc curve times must increase".into(),
            ));
        }
        if !b.point.is_regular() {
            return Err(Error::SingularPoint { r2: b.point.r2() });
        }
        let failed = std::cell::Cell::new(false);
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            let g = numerics::unrealify(2, y);
            let v = hermite_velocity(a, b, (t - a.t) / h, h);
            match lift_tangent(&GroupElement::from_trusted(g.clone()), &v) {
                Ok(p) => dy.copy_from_slice(&numerics::realify(&(p.matrix() * &g))),
                Err(_) => {
                    failed.set(true);
                    dy.fill(0.0);
                }
            }
        };
        state = rk4_step(&rhs, a.t, &state, h);
        if failed.get() {
            return Err(Error::SingularFiber);
        }
        let g = GroupElement::from_trusted(numerics::unrealify(2, &state));
        let r2 = project(&g)?.r2();
        if !(r2 < 1.0) {
            return Err(Error::SingularPoint { r2 });
        }
        times.push(b.t);
        points.push(g);
    }
    CurveSamples::new(times, points)
}

/// Trapezoidal length `int sqrt(g(v, v)) dt` of a disc curve.
pub fn quotient_length(curve: &[DiscSample]) -> Result<f64> {
    let speeds = curve
        .iter()
        .map(|s| speed_squared(&s.point, &s.velocity).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    Ok(curve
        .windows(2)
        .zip(speeds.windows(2))
        .map(|(s, v)| 0.5 * (s[1].t - s[0].t) * (v[0] + v[1]))
        .sum())
}

/// Projection of a closed-form SU(2) geodesic on `[t0, t1]` with exact
/// disc velocities `(C(t) X(t))_{11}`.
pub fn projected_geodesic(
    spec: &GeodesicSpec,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Vec<DiscSample>> {
    require_su2(spec.decomposition().n())?;
    uniform_grid(t0, t1, dt)?
        .into_iter()
        .map(|t| {
            let x = spec.point_unchecked(t);
            let xi = spec.control_unchecked(t);
            Ok(DiscSample {
                t,
                point: project(&x)?,
                velocity: project_velocity(&x, &xi)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricGridRow {
    pub x: f64,
    pub y: f64,
    pub g_xx: f64,
    pub curvature: f64,
}

/// Polar grid: `resolution` radii from 0 to `r_max` times `resolution`
/// angles, `resolution^2` rows in total.
pub fn metric_grid(resolution: usize, r_max: f64) -> Result<Vec<MetricGridRow>> {
    if !(r_max > 0.0 && r_max < 1.0) {
        return Err(Error::OutOfRange {
            what: "r_max",
            value: r_max,
            min: 0.0,
            max: 1.0,
        });
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter(
            "resolution must be at least 2".into(),
        ));
    }
    let mut rows = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let r = r_max * i as f64 / (resolution - 1) as f64;
        for j in 0..resolution {
            let theta = std::f64::consts::TAU * j as f64 / resolution as f64;
            let p = DiscPoint::new(r * theta.cos(), r * theta.sin());
            rows.push(MetricGridRow {
                x: p.x,
                y: p.y,
                g_xx: metric_components(&p)?[0][0],
                curvature: sectional_curvature(&p)?,
            });
        }
    }
    Ok(rows)
}
