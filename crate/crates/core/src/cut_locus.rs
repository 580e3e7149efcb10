//! Sweeps and checks for the SU(2) cut locus.
//!
//! All geodesics here start at the identity and belong to the closed-form
//! family `X(t) = e^{At} e^{(P-A)t}`. For SU(2) with the AIII splitting the
//! family is parametrized by `A = alpha diag(i, -i)` and the unit `P` with
//! phase `phi`, `P = [[0, e^{i phi}], [-e^{-i phi}, 0]]`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::GeodesicSpec;
use crate::lie::{
    su2_diagonal, su2_from_zw, AlgebraElement, GroupElement, KpDecomposition, SU2_KILLING_SCALE,
};
use crate::numerics::{c, from_matrix2, rk4_step, su2_exp, to_matrix2, uniform_grid, ZERO};
use crate::optim::{levenberg_marquardt, LmOptions};
use crate::par::{self, Execution};
use crate::quotient::{self, geodesic_field, DiscPoint, DiscTangent, QuotientGeodesicState};

type M2 = Matrix2<Complex64>;

pub const DEFAULT_HIT_TOL: f64 = 1e-8;
pub const DEFAULT_EPS_TARGET: f64 = 1e-6;

fn require_su2(n: usize) -> Result<()> {
    if n != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: n,
        });
    }
    Ok(())
}

/// The SU(2) AIII splitting with the unit normalization used throughout.
pub fn su2_decomposition() -> Arc<KpDecomposition> {
    Arc::new(KpDecomposition::aiii(2, 1, SU2_KILLING_SCALE).expect("(2, 1) is valid"))
}

fn family_a(alpha: f64) -> M2 {
    M2::new(c(0.0, alpha), ZERO, ZERO, c(0.0, -alpha))
}

fn family_p(phi: f64) -> M2 {
    let e = Complex64::from_polar(1.0, phi);
    M2::new(ZERO, e, -e.conj(), ZERO)
}

/// `(A, P)` for the family parameters `(alpha, phi)`.
pub fn family_elements(alpha: f64, phi: f64) -> (AlgebraElement, AlgebraElement) {
    let a = AlgebraElement::new(from_matrix2(&family_a(alpha))).expect("diagonal anti-Hermitian");
    let p =
        AlgebraElement::new(from_matrix2(&family_p(phi))).expect("anti-diagonal anti-Hermitian");
    (a, p)
}

pub fn family_spec(
    dec: &Arc<KpDecomposition>,
    alpha: f64,
    phi: f64,
    t_max: f64,
    dt: f64,
) -> Result<GeodesicSpec> {
    let (a, p) = family_elements(alpha, phi);
    GeodesicSpec::new(dec.clone(), a, p, t_max, dt)
}

fn family_point(alpha: f64, phi: f64, t: f64) -> M2 {
    let a = family_a(alpha);
    su2_exp(&a, t) * su2_exp(&(family_p(phi) - a), t)
}

/// Operator-norm distance of two SU(2) matrices, `|X - U|_F / sqrt 2`.
fn su2_distance(x: &M2, u: &M2) -> f64 {
    (x - u).norm() / std::f64::consts::SQRT_2
}

fn closed_form(spec: &GeodesicSpec) -> (M2, M2, M2) {
    (
        to_matrix2(spec.a().matrix()),
        to_matrix2(spec.p().matrix()),
        to_matrix2(&(spec.p().matrix() - spec.a().matrix())),
    )
}

/// `(1 - |z|^2, d/dt (1 - |z|^2))` along an SU(2) closed-form geodesic.
fn boundary_gap(a: &M2, p: &M2, drift: &M2, t: f64) -> (f64, f64, M2) {
    let ea = su2_exp(a, t);
    let x = ea * su2_exp(drift, t);
    let ctrl = ea * p * ea.adjoint();
    let z = x[(0, 0)];
    let dz = ctrl[(0, 0)] * x[(0, 0)] + ctrl[(0, 1)] * x[(1, 0)];
    (1.0 - z.norm_sqr(), -2.0 * (z.conj() * dz).re, x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularHit {
    pub time: f64,
    pub point: GroupElement,
}

/// First contact of an SU(2) geodesic with the singular stratum.
///
/// `1 - |z|^2` touches zero tangentially, so the hit is located as the
/// first local minimum of that gap after departure (a sign change of its
/// exact derivative, refined by bisection) and accepted when the gap there
/// is below `tol`. Returns `None` for `n != 2`, for `P = 0`, or when no
/// contact happens before `t_max`.
pub fn first_singular_hit(spec: &GeodesicSpec, tol: f64) -> Option<SingularHit> {
    if spec.decomposition().n() != 2 || spec.speed() == 0.0 {
        return None;
    }
    let (a, p, drift) = closed_form(spec);
    let grid = uniform_grid(0.0, spec.t_max(), spec.dt()).ok()?;
    let mut prev: Option<(f64, f64)> = None;
    for &t in grid.iter().skip(1) {
        let (_, dh, _) = boundary_gap(&a, &p, &drift, t);
        if let Some((t0, dh0)) = prev {
            if dh0 < 0.0 && dh >= 0.0 {
                let (mut lo, mut hi) = (t0, t);
                while hi - lo > 1e-13 * hi.max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    if boundary_gap(&a, &p, &drift, mid).1 < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let time = 0.5 * (lo + hi);
                let (h, _, x) = boundary_gap(&a, &p, &drift, time);
                if h < tol {
                    return Some(SingularHit {
                        time,
                        point: GroupElement::from_trusted(from_matrix2(&x)),
                    });
                }
            }
        }
        prev = Some((t, dh));
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMatching {
    /// `|X - U| < eps_target`.
    #[default]
    Strict,
    /// `min(|X - U|, |X + U|) < eps_target`.
    Projective,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub phases: usize,
    pub a_steps: usize,
    pub a_max: f64,
    pub dt: f64,
    pub t_max: f64,
    pub eps_target: f64,
    pub delta_tie: f64,
    pub matching: TargetMatching,
    /// Local minima of the scan below this distance are refined.
    pub seed_radius: f64,
    pub seeds_per_cell: usize,
    /// Refined solutions closer than this in `alpha` and `phi` are the same.
    pub cluster_tol: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            phases: 64,
            a_steps: 33,
            a_max: 4.0,
            dt: 1e-3,
            t_max: 1.2 * PI,
            eps_target: DEFAULT_EPS_TARGET,
            delta_tie: 2e-3,
            matching: TargetMatching::Strict,
            seed_radius: 0.5,
            seeds_per_cell: 3,
            cluster_tol: 1e-5,
            exec: Execution::default(),
        }
    }
}

impl SweepParams {
    pub fn validate(&self) -> Result<()> {
        if self.phases == 0 || self.a_steps == 0 {
            return Err(Error::InvalidParameter(
                "sweep grid must be non-empty".into(),
            ));
        }
        for (what, v) in [
            ("a_max", self.a_max),
            ("t_max", self.t_max),
            ("eps_target", self.eps_target),
            ("delta_tie", self.delta_tie),
            ("seed_radius", self.seed_radius),
            ("cluster_tol", self.cluster_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{what} must be finite and >= 0"
                )));
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be > 0".into()));
        }
        Ok(())
    }

    fn alpha(&self, j: usize) -> f64 {
        if self.a_steps == 1 {
            0.0
        } else {
            -self.a_max + 2.0 * self.a_max * j as f64 / (self.a_steps - 1) as f64
        }
    }

    fn phase(&self, i: usize) -> f64 {
        TAU * i as f64 / self.phases as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepStatus {
    /// The target is the identity (or `-I` under projective matching).
    Trivial,
    Reached,
    Unreached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub alpha: f64,
    pub phase: f64,
    pub time: f64,
    /// Operator-norm distance to the target at `time`.
    pub residual: f64,
    #[serde(with = "crate::io::matrix_serde")]
    pub a: crate::numerics::CMat,
    #[serde(with = "crate::io::matrix_serde")]
    pub p: crate::numerics::CMat,
}

impl Minimizer {
    fn new(alpha: f64, phase: f64, time: f64, residual: f64) -> Self {
        let (a, p) = family_elements(alpha, phase);
        Self {
            alpha,
            phase,
            time,
            residual,
            a: a.into_matrix(),
            p: p.into_matrix(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosestApproach {
    pub distance: f64,
    pub alpha: f64,
    pub phase: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub status: SweepStatus,
    pub best_time: Option<f64>,
    /// One representative per distinct `(alpha, phi)` reaching the target
    /// within `delta_tie` of the best time.
    pub minimizers: Vec<Minimizer>,
    pub multiplicity: usize,
    /// Time from the best solution to the next distinct, slower one.
    pub gap: Option<f64>,
    pub closest_approach: ClosestApproach,
    /// `acos |z|`, a lower bound on the distance from the identity.
    pub lower_bound: f64,
    pub cells: usize,
    pub seeds: usize,
}

#[derive(Clone, Copy)]
struct Seed {
    alpha: f64,
    phase: f64,
    time: f64,
    sign: f64,
}

struct CellScan {
    closest: ClosestApproach,
    seeds: Vec<Seed>,
}

fn matched_distance(x: &M2, u: &M2, matching: TargetMatching) -> (f64, f64) {
    let d = su2_distance(x, u);
    match matching {
        TargetMatching::Strict => (d, 1.0),
        TargetMatching::Projective => {
            let dm = su2_distance(x, &(-u));
            if dm < d {
                (dm, -1.0)
            } else {
                (d, 1.0)
            }
        }
    }
}

fn scan_cell(u: &M2, alpha: f64, phase: f64, params: &SweepParams) -> CellScan {
    let a = family_a(alpha);
    let step_left = su2_exp(&a, params.dt);
    let step_right = su2_exp(&(family_p(phase) - a), params.dt);
    let steps = (params.t_max / params.dt).floor() as usize;
    let (mut left, mut right) = (M2::identity(), M2::identity());
    let mut closest = ClosestApproach {
        distance: f64::INFINITY,
        alpha,
        phase,
        time: 0.0,
    };
    let mut seeds = Vec::new();
    let mut window = [(f64::INFINITY, 1.0); 2];
    for k in 0..=steps {
        let t = k as f64 * params.dt;
        let (d, sign) = matched_distance(&(left * right), u, params.matching);
        if k > 0 && d < closest.distance {
            closest.distance = d;
            closest.time = t;
        }
        let (d1, s1) = window[1];
        if k >= 2
            && d1 <= window[0].0
            && d1 < d
            && d1 < params.seed_radius
            && seeds.len() < params.seeds_per_cell
        {
            seeds.push(Seed {
                alpha,
                phase,
                time: t - params.dt,
                sign: s1,
            });
        }
        window = [window[1], (d, sign)];
        left *= step_left;
        right *= step_right;
    }
    // still descending at the horizon
    let (d1, s1) = window[1];
    if d1 < window[0].0 && d1 < params.seed_radius && seeds.len() < params.seeds_per_cell {
        seeds.push(Seed {
            alpha,
            phase,
            time: steps as f64 * params.dt,
            sign: s1,
        });
    }
    CellScan { closest, seeds }
}

fn refine(u: &M2, seed: &Seed, params: &SweepParams) -> Option<Minimizer> {
    let target = u * c(seed.sign, 0.0);
    let residual = |x: &[f64]| {
        let m = family_point(x[0], x[1], x[2]) - target;
        Some(m.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<f64>>())
    };
    let opts = LmOptions {
        max_iterations: 60,
        fd_step: 1e-7,
        residual_tol: 1e-14,
        step_tol: 1e-16,
    };
    let r = levenberg_marquardt(residual, &[seed.alpha, seed.phase, seed.time], &opts)?;
    let (alpha, phase, time) = (r.x[0], r.x[1].rem_euclid(TAU), r.x[2]);
    let dist = su2_distance(&family_point(alpha, phase, time), &target);
    let in_range = time > 0.0 && time <= params.t_max && alpha.abs() <= params.a_max + 0.5;
    (in_range && dist < params.eps_target).then(|| Minimizer::new(alpha, phase, time, dist))
}

fn same_direction(a: &Minimizer, b: &Minimizer, tol: f64) -> bool {
    let dphi = (a.phase - b.phase).rem_euclid(TAU);
    (a.alpha - b.alpha).abs() <= tol && dphi.min(TAU - dphi) <= tol
}

/// Minimal time over the family to reach `target`.
///
/// Every grid cell `(alpha_j, phi_i)` is scanned on the time grid; local
/// minima of the distance seed a Levenberg-Marquardt refinement in
/// `(alpha, phi, t)`, and refined solutions within `eps_target` are kept.
/// The best time is the earliest solution; minimizers are the distinct
/// directions within `delta_tie` of it.
pub fn sweep_distance(target: &GroupElement, params: &SweepParams) -> Result<SweepReport> {
    require_su2(target.n())?;
    params.validate()?;
    let u = to_matrix2(target.matrix());
    let z = u[(0, 0)];
    let lower_bound = z.norm().min(1.0).acos();
    let cells = params.phases * params.a_steps;
    let (d0, _) = matched_distance(&M2::identity(), &u, params.matching);
    if d0 < params.eps_target {
        return Ok(SweepReport {
            status: SweepStatus::Trivial,
            best_time: Some(0.0),
            minimizers: Vec::new(),
            multiplicity: 0,
            gap: None,
            closest_approach: ClosestApproach {
                distance: d0,
                alpha: 0.0,
                phase: 0.0,
                time: 0.0,
            },
            lower_bound,
            cells: 0,
            seeds: 0,
        });
    }

    let scans = par::map_range(params.exec, cells, |idx| {
        let (i, j) = (idx / params.a_steps, idx % params.a_steps);
        scan_cell(&u, params.alpha(j), params.phase(i), params)
    });
    let mut closest = scans[0].closest;
    for s in &scans {
        if s.closest.distance < closest.distance {
            closest = s.closest;
        }
    }
    let seeds: Vec<Seed> = scans.into_iter().flat_map(|s| s.seeds).collect();
    let mut solutions: Vec<Minimizer> = par::map(params.exec, &seeds, |s| refine(&u, s, params))
        .into_iter()
        .flatten()
        .collect();
    solutions.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut report = SweepReport {
        status: SweepStatus::Unreached,
        best_time: None,
        minimizers: Vec::new(),
        multiplicity: 0,
        gap: None,
        closest_approach: closest,
        lower_bound,
        cells,
        seeds: seeds.len(),
    };
    let Some(best) = solutions.first().map(|s| s.time) else {
        return Ok(report);
    };
    let mut minimizers: Vec<Minimizer> = Vec::new();
    for s in solutions
        .iter()
        .filter(|s| s.time <= best + params.delta_tie)
    {
        if !minimizers
            .iter()
            .any(|m| same_direction(m, s, params.cluster_tol))
        {
            minimizers.push(s.clone());
        }
    }
    minimizers.sort_by(|a, b| {
        a.phase
            .total_cmp(&b.phase)
            .then(a.alpha.total_cmp(&b.alpha))
    });
    report.gap = solutions
        .iter()
        .find(|s| s.time > best + params.delta_tie)
        .map(|s| s.time - best);
    report.status = SweepStatus::Reached;
    report.best_time = Some(best);
    report.multiplicity = minimizers.len();
    report.minimizers = minimizers;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachFlag {
    pub first: usize,
    pub second: usize,
    pub separation: f64,
    pub point: DiscPoint,
    pub crossing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonIntersectionReport {
    pub pairs_checked: usize,
    pub flagged: Vec<ApproachFlag>,
    /// Smallest separation seen after the curves had first moved more than
    /// `tol` apart (infinite if no pair ever did).
    pub min_separation_after_departure: f64,
}

impl NonIntersectionReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

fn regular_projection(spec: &GeodesicSpec, t_max: f64, dt: f64) -> Result<Vec<DiscPoint>> {
    let end = first_singular_hit(&spec.with_horizon(t_max, dt)?, DEFAULT_HIT_TOL)
        .map_or(t_max, |h| h.time);
    let mut pts = Vec::new();
    for t in uniform_grid(0.0, t_max, dt)? {
        let p = quotient::project(&spec.point_unchecked(t))?;
        if t > 0.0 && (t >= end || !p.is_regular()) {
            break;
        }
        pts.push(p);
    }
    Ok(pts)
}

fn segment_point_distance_squared(p: &DiscPoint, a: &DiscPoint, b: &DiscPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (p.x - a.x - s * dx, p.y - a.y - s * dy);
    ex * ex + ey * ey
}

const CHUNK: usize = 32;
const CHUNKS_PER_GROUP: usize = 16;

#[derive(Clone, Copy)]
struct BoundingBox {
    lo: DiscPoint,
    hi: DiscPoint,
}

impl BoundingBox {
    fn of(points: &[DiscPoint]) -> Self {
        let mut b = BoundingBox {
            lo: points[0],
            hi: points[0],
        };
        for p in points {
            b.lo = DiscPoint::new(b.lo.x.min(p.x), b.lo.y.min(p.y));
            b.hi = DiscPoint::new(b.hi.x.max(p.x), b.hi.y.max(p.y));
        }
        b
    }

    fn distance_squared(&self, p: &DiscPoint) -> f64 {
        let dx = (self.lo.x - p.x).max(p.x - self.hi.x).max(0.0);
        let dy = (self.lo.y - p.y).max(p.y - self.hi.y).max(0.0);
        dx * dx + dy * dy
    }

    fn union(&self, other: &Self) -> Self {
        BoundingBox {
            lo: DiscPoint::new(self.lo.x.min(other.lo.x), self.lo.y.min(other.lo.y)),
            hi: DiscPoint::new(self.hi.x.max(other.hi.x), self.hi.y.max(other.hi.y)),
        }
    }

    fn overlaps(&self, other: &Self) -> bool {
        self.lo.x <= other.hi.x
            && other.lo.x <= self.hi.x
            && self.lo.y <= other.hi.y
            && other.lo.y <= self.hi.y
    }
}

/// A sampled curve with per-chunk bounding boxes for pruned searches.
struct Polyline<'a> {
    points: &'a [DiscPoint],
    /// `(first segment, box)`; a chunk covers segments `first..first + CHUNK`.
    chunks: Vec<(usize, BoundingBox)>,
    /// Boxes over runs of `CHUNKS_PER_GROUP` chunks.
    groups: Vec<BoundingBox>,
}

impl<'a> Polyline<'a> {
    fn new(points: &'a [DiscPoint]) -> Self {
        let segments = points.len().saturating_sub(1);
        let chunks = (0..segments)
            .step_by(CHUNK)
            .map(|first| {
                let last = (first + CHUNK).min(segments);
                (first, BoundingBox::of(&points[first..=last]))
            })
            .collect::<Vec<_>>();
        let groups = chunks
            .chunks(CHUNKS_PER_GROUP)
            .map(|g| g.iter().skip(1).fold(g[0].1, |acc, (_, b)| acc.union(b)))
            .collect();
        Self {
            points,
            chunks,
            groups,
        }
    }

    fn segments(&self, first: usize) -> std::ops::Range<usize> {
        first..(first + CHUNK).min(self.points.len() - 1)
    }

    /// Distance from `p` to the polyline and the nearest segment. Segments
    /// around `hint` are tried first so that most chunks get pruned.
    fn distance(&self, p: &DiscPoint, hint: usize) -> (f64, usize) {
        let segments = self.points.len().saturating_sub(1);
        if segments == 0 {
            return (p.distance(&self.points[0]), 0);
        }
        let seg =
            |k: usize| segment_point_distance_squared(p, &self.points[k], &self.points[k + 1]);
        let mut best = (f64::INFINITY, 0);
        let hint = hint.min(segments - 1);
        for k in hint.saturating_sub(4)..(hint + 5).min(segments) {
            let d = seg(k);
            if d < best.0 {
                best = (d, k);
            }
        }
        for (g, gbox) in self.groups.iter().enumerate() {
            if gbox.distance_squared(p) >= best.0 {
                continue;
            }
            let lo = g * CHUNKS_PER_GROUP;
            for (first, bbox) in &self.chunks[lo..(lo + CHUNKS_PER_GROUP).min(self.chunks.len())] {
                if bbox.distance_squared(p) >= best.0 {
                    continue;
                }
                for k in self.segments(*first) {
                    let d = seg(k);
                    if d < best.0 {
                        best = (d, k);
                    }
                }
            }
        }
        (best.0.sqrt(), best.1)
    }

    /// First crossing found farther than `exclude` from `origin`.
    fn crossing(&self, other: &Polyline, origin: &DiscPoint, exclude: f64) -> Option<DiscPoint> {
        for (f1, b1) in &self.chunks {
            for (f2, b2) in &other.chunks {
                if !b1.overlaps(b2) {
                    continue;
                }
                for i in self.segments(*f1) {
                    for j in other.segments(*f2) {
                        let (p, q) = (&self.points, &other.points);
                        if let Some(x) = segment_crossing(&p[i], &p[i + 1], &q[j], &q[j + 1]) {
                            if x.distance(origin) > exclude {
                                return Some(x);
                            }
                        }
                    }
                }
            }
        }
        None
    }
}

fn segment_crossing(
    a: &DiscPoint,
    b: &DiscPoint,
    c: &DiscPoint,
    d: &DiscPoint,
) -> Option<DiscPoint> {
    let cross = |ux: f64, uy: f64, vx: f64, vy: f64| ux * vy - uy * vx;
    let (rx, ry) = (b.x - a.x, b.y - a.y);
    let (sx, sy) = (d.x - c.x, d.y - c.y);
    let denom = cross(rx, ry, sx, sy);
    if denom == 0.0 {
        return None;
    }
    let (qx, qy) = (c.x - a.x, c.y - a.y);
    let u = cross(qx, qy, sx, sy) / denom;
    let v = cross(qx, qy, rx, ry) / denom;
    ((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v))
        .then(|| DiscPoint::new(a.x + u * rx, a.y + u * ry))
}

/// Along `first`, the distance to `second` must stay above `tol` once it
/// has exceeded it.
fn return_approach(
    first: &Polyline,
    second: &Polyline,
    tol: f64,
) -> (Option<(f64, DiscPoint)>, f64) {
    let mut departed = false;
    let mut min_after = f64::INFINITY;
    let mut worst: Option<(f64, DiscPoint)> = None;
    let mut hint = 0;
    for p in first.points {
        let (d, nearest) = second.distance(p, hint);
        hint = nearest;
        if departed {
            min_after = min_after.min(d);
            if d < tol && worst.is_none_or(|(w, _)| d < w) {
                worst = Some((d, *p));
            }
        } else if d > tol {
            departed = true;
        }
    }
    (worst, min_after)
}

fn check_pair(c1: &[DiscPoint], c2: &[DiscPoint], tol: f64) -> (Option<ApproachFlag>, f64) {
    let (l1, l2) = (Polyline::new(c1), Polyline::new(c2));
    let (f12, m12) = return_approach(&l1, &l2, tol);
    let (f21, m21) = return_approach(&l2, &l1, tol);
    let min_after = m12.min(m21);
    let approach = match (f12, f21) {
        (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
        (a, b) => a.or(b),
    };
    let flag = |separation: f64, point: DiscPoint, crossing: bool| ApproachFlag {
        first: 0,
        second: 0,
        separation,
        point,
        crossing,
    };
    if let Some((separation, point)) = approach {
        return (Some(flag(separation, point, false)), min_after);
    }
    let crossing = l1
        .crossing(&l2, &DiscPoint::new(1.0, 0.0), tol)
        .map(|x| flag(0.0, x, true));
    (crossing, min_after)
}

/// Pairwise check that projected geodesics from the identity never meet in
/// the open disc. Each curve is cut at its first singular hit. Near the
/// shared start `(1, 0)` all curves are close; a pair is flagged only if
/// the curves cross away from the start, or if one comes back within `tol`
/// of the other after having left that neighbourhood.
pub fn regular_non_intersection_check(
    specs: &[GeodesicSpec],
    t_max: f64,
    dt: f64,
    tol: f64,
    exec: Execution,
) -> Result<NonIntersectionReport> {
    for s in specs {
        require_su2(s.decomposition().n())?;
    }
    let curves = par::map(exec, specs, |s| regular_projection(s, t_max, dt))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|i| (i + 1..specs.len()).map(move |j| (i, j)))
        .collect();
    let results = par::map(exec, &pairs, |&(i, j)| {
        check_pair(&curves[i], &curves[j], tol)
    });
    let mut report = NonIntersectionReport {
        pairs_checked: pairs.len(),
        flagged: Vec::new(),
        min_separation_after_departure: f64::INFINITY,
    };
    for (&(i, j), (flag, min_after)) in pairs.iter().zip(results) {
        report.min_separation_after_departure =
            report.min_separation_after_departure.min(min_after);
        if let Some(mut f) = flag {
            f.first = i;
            f.second = j;
            report.flagged.push(f);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingParams {
    pub directions: usize,
    pub dt: f64,
    /// Longest geodesic tried; every quotient geodesic reaches the
    /// boundary before arclength `pi`.
    pub s_max: f64,
    pub tol: f64,
    pub seeds: usize,
}

impl Default for ShootingParams {
    fn default() -> Self {
        Self {
            directions: 64,
            dt: 2e-3,
            s_max: PI,
            tol: 1e-10,
            seeds: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum DistanceEstimate {
    Converged {
        distance: f64,
        direction: f64,
        residual: f64,
    },
    /// No shot converged; the Euclidean chord bounds `d_Q` from below since
    /// the quotient metric dominates the Euclidean one.
    Failed { lower_bound: f64 },
}

impl DistanceEstimate {
    pub fn value(&self) -> f64 {
        match *self {
            DistanceEstimate::Converged { distance, .. } => distance,
            DistanceEstimate::Failed { lower_bound } => lower_bound,
        }
    }

    pub fn converged(&self) -> bool {
        matches!(self, DistanceEstimate::Converged { .. })
    }
}

fn unit_start(p: &DiscPoint, theta: f64) -> [f64; 4] {
    let s = (1.0 - p.r2()).sqrt();
    [p.x, p.y, s * theta.cos(), s * theta.sin()]
}

fn shoot(p: &DiscPoint, theta: f64, s: f64, steps: usize) -> Option<DiscPoint> {
    let mut y = unit_start(p, theta).to_vec();
    let h = s / steps as f64;
    let f = |_: f64, y: &[f64], dy: &mut [f64]| geodesic_field(y, dy);
    for k in 0..steps {
        y = rk4_step(&f, k as f64 * h, &y, h);
        if !(y[0] * y[0] + y[1] * y[1] < 1.0) {
            return None;
        }
    }
    Some(DiscPoint::new(y[0], y[1]))
}

/// Quotient distance between two regular disc points by geodesic shooting:
/// an angular scan of unit-speed geodesics from `p1` seeds a
/// Levenberg-Marquardt solve for `(direction, arclength)` hitting `p2`.
pub fn quotient_distance(
    p1: &DiscPoint,
    p2: &DiscPoint,
    params: &ShootingParams,
) -> Result<DistanceEstimate> {
    for p in [p1, p2] {
        if !p.is_regular() {
            return Err(Error::SingularPoint { r2: p.r2() });
        }
    }
    if p1 == p2 {
        return Ok(DistanceEstimate::Converged {
            distance: 0.0,
            direction: 0.0,
            residual: 0.0,
        });
    }
    let mut candidates: Vec<(f64, f64, f64)> = (0..params.directions)
        .filter_map(|k| {
            let theta = TAU * k as f64 / params.directions as f64;
            let y0 = unit_start(p1, theta);
            let start = QuotientGeodesicState {
                point: *p1,
                velocity: DiscTangent::new(y0[2], y0[3]),
            };
            let curve =
                quotient::quotient_geodesic_with(&start, params.s_max, params.dt, 1e-9).ok()?;
            curve
                .samples
                .iter()
                .map(|s| (s.point.distance(p2), theta, s.t))
                .min_by(|a, b| a.0.total_cmp(&b.0))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let opts = LmOptions {
        max_iterations: 50,
        fd_step: 1e-7,
        residual_tol: params.tol * 1e-2,
        step_tol: 1e-16,
    };
    let mut best: Option<DistanceEstimate> = None;
    for &(_, theta, s) in candidates.iter().take(params.seeds) {
        let steps = ((s.max(params.dt) / params.dt).ceil() as usize).max(64);
        let residual = |x: &[f64]| {
            if !(x[1] > 0.0) {
                return None;
            }
            shoot(p1, x[0], x[1], steps).map(|q| vec![q.x - p2.x, q.y - p2.y])
        };
        let Some(r) = levenberg_marquardt(residual, &[theta, s.max(params.dt)], &opts) else {
            continue;
        };
        if r.residual_norm < params.tol && best.is_none_or(|b| r.x[1] < b.value()) {
            best = Some(DistanceEstimate::Converged {
                distance: r.x[1],
                direction: r.x[0].rem_euclid(TAU),
                residual: r.residual_norm,
            });
        }
    }
    Ok(best.unwrap_or(DistanceEstimate::Failed {
        lower_bound: p1.distance(p2),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub t_grid: Vec<f64>,
    pub distances: Vec<DistanceEstimate>,
    /// `min_i f(t_{i+1}) - 2 f(t_i) + f(t_{i-1})`; infinite for fewer than
    /// three grid points.
    pub min_second_difference: f64,
    pub failures: usize,
}

/// Samples `f(t) = d_Q(pi(gamma_1(t)), pi(gamma_2(t)))` on `t_grid`.
pub fn convexity_check(
    spec1: &GeodesicSpec,
    spec2: &GeodesicSpec,
    t_grid: &[f64],
    params: &ShootingParams,
    exec: Execution,
) -> Result<ConvexityReport> {
    require_su2(spec1.decomposition().n())?;
    require_su2(spec2.decomposition().n())?;
    let distances = par::map(exec, t_grid, |&t| {
        let p1 = quotient::project(&spec1.point_unchecked(t))?;
        let p2 = quotient::project(&spec2.point_unchecked(t))?;
        quotient_distance(&p1, &p2, params)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let f: Vec<f64> = distances.iter().map(DistanceEstimate::value).collect();
    let min_second_difference = f
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .fold(f64::INFINITY, f64::min);
    Ok(ConvexityReport {
        t_grid: t_grid.to_vec(),
        failures: distances.iter().filter(|d| !d.converged()).count(),
        distances,
        min_second_difference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutLocusGrid {
    /// Regular targets sit on a `side x side` Cartesian grid of the square
    /// inscribed in `|z| <= r_max`, with `w` real and positive.
    pub side: usize,
    pub r_max: f64,
    /// Diagonal targets `diag(e^{i theta}, e^{-i theta})`.
    pub diagonal_angles: Vec<f64>,
    pub sweep: SweepParams,
}

impl Default for CutLocusGrid {
    fn default() -> Self {
        Self {
            side: 3,
            r_max: 0.75,
            diagonal_angles: vec![PI / 3.0, 2.0 * PI / 3.0, PI, 4.0 * PI / 3.0, 5.0 * PI / 3.0],
            sweep: SweepParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Regular,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutLocusRow {
    pub kind: TargetKind,
    pub z: DiscPoint,
    pub status: SweepStatus,
    pub best_time: Option<f64>,
    pub multiplicity: usize,
    pub lower_bound: f64,
    /// Regular targets need a unique minimizer, diagonal ones at least two.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutLocusReport {
    pub rows: Vec<CutLocusRow>,
    pub passed: bool,
}

pub fn regular_targets(side: usize, r_max: f64) -> Result<Vec<GroupElement>> {
    if side == 0 || !(0.0..1.0).contains(&r_max) {
        return Err(Error::InvalidParameter(
            "regular grid needs side >= 1 and 0 <= r_max < 1".into(),
        ));
    }
    let m = r_max / std::f64::consts::SQRT_2;
    let coord = |k: usize| {
        if side == 1 {
            0.0
        } else {
            -m + 2.0 * m * k as f64 / (side - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            let z = c(coord(j), coord(i));
            out.push(su2_from_zw(z, c((1.0 - z.norm_sqr()).sqrt(), 0.0))?);
        }
    }
    Ok(out)
}

/// Sweeps every grid target and tabulates minimizer multiplicities.
/// Identity targets are dropped.
pub fn cut_locus_report(grid: &CutLocusGrid) -> Result<CutLocusReport> {
    let mut targets: Vec<(TargetKind, GroupElement)> = regular_targets(grid.side, grid.r_max)?
        .into_iter()
        .map(|g| (TargetKind::Regular, g))
        .collect();
    targets.extend(
        grid.diagonal_angles
            .iter()
            .map(|&th| (TargetKind::Diagonal, su2_diagonal(th))),
    );
    let mut rows = Vec::new();
    for (kind, target) in targets {
        let report = sweep_distance(&target, &grid.sweep)?;
        if report.status == SweepStatus::Trivial {
            continue;
        }
        let pass = report.status == SweepStatus::Reached
            && match kind {
                TargetKind::Regular => report.multiplicity == 1,
                TargetKind::Diagonal => report.multiplicity >= 2,
            };
        rows.push(CutLocusRow {
            kind,
            z: quotient::project(&target)?,
            status: report.status,
            best_time: report.best_time,
            multiplicity: report.multiplicity,
            lower_bound: report.lower_bound,
            pass,
        });
    }
    let passed = rows.iter().all(|r| r.pass);
    Ok(CutLocusReport { rows, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hit_at_pi_for_pure_p() {
        let dec = su2_decomposition();
        for phi in [0.0, PI / 2.0] {
            let spec = family_spec(&dec, 0.0, phi, 4.0, 1e-3).unwrap();
            let hit = first_singular_hit(&spec, DEFAULT_HIT_TOL).unwrap();
            assert!((hit.time - PI).abs() < 1e-9, "{}", hit.time);
            assert!(hit.point.distance(&su2_diagonal(PI)) < 1e-9);
        }
        let short = family_spec(&dec, 0.0, 0.0, 1.0, 1e-3).unwrap();
        assert!(first_singular_hit(&short, DEFAULT_HIT_TOL).is_none());
    }

    #[test]
    fn hit_time_with_drift() {
        let dec = su2_decomposition();
        let alpha: f64 = 0.7;
        let spec = family_spec(&dec, alpha, 1.0, 4.0, 1e-3).unwrap();
        let hit = first_singular_hit(&spec, DEFAULT_HIT_TOL).unwrap();
        assert!((hit.time - PI / (1.0 + alpha * alpha).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn identity_target_is_trivial() {
        let r = sweep_distance(&GroupElement::identity(2), &SweepParams::default()).unwrap();
        assert_eq!(r.status, SweepStatus::Trivial);
        assert_eq!(r.best_time, Some(0.0));
    }

    #[test]
    fn segment_crossing_detects_x() {
        let x = segment_crossing(
            &DiscPoint::new(-1.0, 0.0),
            &DiscPoint::new(1.0, 0.0),
            &DiscPoint::new(0.0, -1.0),
            &DiscPoint::new(0.0, 1.0),
        )
        .unwrap();
        assert!(x.distance(&DiscPoint::default()) < 1e-15);
        assert!(segment_crossing(
            &DiscPoint::new(0.0, 0.0),
            &DiscPoint::new(1.0, 0.0),
            &DiscPoint::new(0.0, 1.0),
            &DiscPoint::new(1.0, 1.0),
        )
        .is_none());
    }

    #[test]
    fn distance_to_self_is_zero() {
        let p = DiscPoint::new(0.2, 0.1);
        let d = quotient_distance(&p, &p, &ShootingParams::default()).unwrap();
        assert_eq!(d.value(), 0.0);
    }
}
