//! Dense complex matrices, the matrix exponential, fixed-step RK4 and seeded
//! random generation. Everything else in the crate sits on top of this.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Square complex matrix, stored densely.
pub type CMat = DMatrix<Complex64>;

/// Seeded generator used for every random draw in the crate.
pub type SeededRng = Xoshiro256PlusPlus;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn seeded_rng(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn ensure_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Build a matrix from row-major rows, rejecting ragged or non-square input.
pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<CMat> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare {
            rows: n,
            cols: bad.len(),
        });
    }
    if n == 0 {
        return Err(Error::NotSquare { rows: 0, cols: 0 });
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Row-major `[re, im, re, im, ...]` flattening, used as the real vector
/// space underlying `n x n` complex matrices.
pub fn realify(m: &CMat) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

pub fn unrealify(n: usize, v: &[f64]) -> CMat {
    debug_assert_eq!(v.len(), 2 * n * n);
    CMat::from_fn(n, n, |i, j| {
        let k = 2 * (i * n + j);
        c(v[k], v[k + 1])
    })
}

/// `e^{tX}` by scaling and squaring around a truncated Taylor series.
///
/// The argument is halved until its Frobenius norm is at most 1/2, the series
/// is summed until the next term drops below machine precision relative to the
/// partial sum, and the result is squared back up.
pub fn mat_exp(x: &CMat, t: f64) -> Result<CMat> {
    let n = ensure_square(x)?;
    let a = x * c(t, 0.0);
    let norm = frobenius(&a);
    if !norm.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "matrix exponential of non-finite argument (norm {norm})"
        )));
    }
    let mut squarings = 0u32;
    let mut scaled = norm;
    while scaled > 0.5 {
        scaled *= 0.5;
        squarings += 1;
    }
    let a = a * c(0.5f64.powi(squarings as i32), 0.0);

    let mut sum = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=40 {
        term = &term * &a * c(1.0 / k as f64, 0.0);
        sum += &term;
        if frobenius(&term) <= 1e-18 * frobenius(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Closed-form exponential for a traceless 2x2 matrix with `X^2 = -lambda^2 1`
/// (every element of su(2)): `cos(lambda t) 1 + sin(lambda t)/lambda X`.
pub fn su2_exp(x: &Matrix2<Complex64>, t: f64) -> Matrix2<Complex64> {
    // Cayley-Hamilton: X^2 = -det(X) 1 for traceless X
    let lambda2 = (x[(0, 0)] * x[(1, 1)] - x[(0, 1)] * x[(1, 0)]).re;
    let lambda = lambda2.max(0.0).sqrt();
    let (cos, sinc) = if lambda * t.abs() < 1e-8 {
        (
            1.0 - 0.5 * lambda2 * t * t,
            t * (1.0 - lambda2 * t * t / 6.0),
        )
    } else {
        ((lambda * t).cos(), (lambda * t).sin() / lambda)
    };
    Matrix2::identity() * c(cos, 0.0) + x * c(sinc, 0.0)
}

pub fn to_matrix2(m: &CMat) -> Matrix2<Complex64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

pub fn from_matrix2(m: &Matrix2<Complex64>) -> CMat {
    CMat::from_fn(2, 2, |i, j| m[(i, j)])
}

/// Sample times `t0, t0 + dt, ...` plus `t1` when it is not on the grid.
///
/// Grid points within `1e-9 dt` of `t1` are snapped to it so that, e.g.,
/// `t1 = 1.0, dt = 1e-3` yields exactly 1001 samples.
pub fn uniform_grid(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {dt}"
        )));
    }
    if !(t1 >= t0) || !t1.is_finite() || !t0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "interval end {t1} precedes start {t0}"
        )));
    }
    let ratio = (t1 - t0) / dt;
    let nearest = ratio.round();
    let (steps, on_grid) = if (ratio - nearest).abs() < 1e-9 {
        (nearest as usize, true)
    } else {
        (ratio.floor() as usize, false)
    };
    let mut times: Vec<f64> = (0..=steps).map(|k| t0 + k as f64 * dt).collect();
    if on_grid {
        *times.last_mut().unwrap() = t1;
    } else {
        times.push(t1);
    }
    Ok(times)
}

/// One classical RK4 step of `y' = f(t, y)` with step `h`.
pub fn rk4_step<F>(f: &F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    (0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSample {
    pub t: f64,
    pub y: Vec<f64>,
}

/// The state left the caller's validity region during a step.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainExit {
    /// Last accepted state, located by bisecting the offending step length.
    pub last_valid: OdeSample,
    /// Time of the first sample that failed validation.
    pub rejected_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    /// Accepted samples. On domain exit the bisected boundary sample is the
    /// final entry.
    pub samples: Vec<OdeSample>,
    pub exit: Option<DomainExit>,
}

impl OdeSolution {
    pub fn last(&self) -> &OdeSample {
        self.samples
            .last()
            .expect("solution always holds the initial state")
    }
}

/// Fixed-step RK4 on `[t0, t1]` sampled at `t0 + k dt` plus the endpoint.
///
/// `valid` is checked on every accepted state; the first failing step is
/// bisected (on its length) down to `1e-13` relative precision and the
/// integration stops with a [`DomainExit`].
pub fn integrate_ode<F, V>(
    f: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
    valid: V,
) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64], &mut [f64]),
    V: Fn(&[f64]) -> bool,
{
    let times = uniform_grid(t0, t1, dt)?;
    let accept = |y: &[f64]| y.iter().all(|v| v.is_finite()) && valid(y);
    if !accept(y0) {
        return Err(Error::InvalidParameter(
            "initial state outside the validity region".into(),
        ));
    }
    let mut samples = Vec::with_capacity(times.len());
    samples.push(OdeSample {
        t: t0,
        y: y0.to_vec(),
    });
    for w in times.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let y = &samples.last().unwrap().y;
        let next = rk4_step(&f, ta, y, tb - ta);
        if accept(&next) {
            samples.push(OdeSample { t: tb, y: next });
            continue;
        }
        let (mut lo, mut hi) = (0.0, tb - ta);
        let mut lo_state = y.clone();
        while hi - lo > 1e-13 * (tb - ta).max(1e-300) {
            let mid = 0.5 * (lo + hi);
            let trial = rk4_step(&f, ta, y, mid);
            if accept(&trial) {
                lo = mid;
                lo_state = trial;
            } else {
                hi = mid;
            }
        }
        let last_valid = OdeSample {
            t: ta + lo,
            y: lo_state,
        };
        if lo > 0.0 {
            samples.push(last_valid.clone());
        }
        return Ok(OdeSolution {
            samples,
            exit: Some(DomainExit {
                last_valid,
                rejected_time: tb,
            }),
        });
    }
    Ok(OdeSolution {
        samples,
        exit: None,
    })
}

pub fn random_gaussian_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

/// Modified Gram-Schmidt on the columns. Columns that become numerically
/// dependent are left as zero.
pub fn gram_schmidt(m: &CMat) -> CMat {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for k in 0..j {
            let proj: Complex64 = (0..q.nrows()).map(|i| q[(i, k)].conj() * q[(i, j)]).sum();
            for i in 0..q.nrows() {
                let v = q[(i, k)];
                q[(i, j)] -= proj * v;
            }
        }
        let norm = (0..q.nrows())
            .map(|i| q[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        let inv = if norm > 1e-14 { 1.0 / norm } else { 0.0 };
        for i in 0..q.nrows() {
            q[(i, j)] *= inv;
        }
    }
    q
}

pub fn random_unitary(n: usize, rng: &mut SeededRng) -> CMat {
    gram_schmidt(&random_gaussian_matrix(n, n, rng))
}

pub fn random_special_unitary(n: usize, rng: &mut SeededRng) -> CMat {
    let u = random_unitary(n, rng);
    let det = u.determinant();
    let phase = c(0.0, -det.arg() / n as f64).exp();
    u * phase
}

/// Random element of su(n) with Frobenius norm `norm`.
pub fn random_anti_hermitian(n: usize, norm: f64, rng: &mut SeededRng) -> CMat {
    let g = random_gaussian_matrix(n, n, rng);
    let mut x = (&g - g.adjoint()) * c(0.5, 0.0);
    let tr = trace(&x) / c(n as f64, 0.0);
    for i in 0..n {
        x[(i, i)] -= tr;
    }
    let f = frobenius(&x);
    if f > 0.0 {
        x *= c(norm / f, 0.0);
    }
    x
}

pub fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn taylor(x: &CMat, t: f64, terms: usize) -> CMat {
        let n = x.nrows();
        let a = x * c(t, 0.0);
        let mut sum = CMat::identity(n, n);
        let mut term = CMat::identity(n, n);
        for k in 1..terms {
            term = &term * &a * c(1.0 / k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&CMat::zeros(2, 2), 1.0).unwrap();
        assert!(frobenius(&(e - CMat::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn exp_of_rotation_generator() {
        let x = from_rows(&[vec![ZERO, ONE], vec![-ONE, ZERO]]).unwrap();
        let e = mat_exp(&x, PI / 4.0).unwrap();
        let oracle = taylor(&x, PI / 4.0, 60);
        assert!(frobenius(&(&e - &oracle)) < 1e-12);
        let h = 0.5f64.sqrt();
        assert!((e[(0, 0)] - c(h, 0.0)).norm() < 1e-14);
        assert!((e[(0, 1)] - c(h, 0.0)).norm() < 1e-14);
        assert!((e[(1, 0)] - c(-h, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn exp_of_diagonal_phase() {
        let x = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![I, -I]));
        let e = mat_exp(&x, PI).unwrap();
        assert!(frobenius(&(e + CMat::identity(2, 2))) < 1e-13);
    }

    #[test]
    fn exp_rejects_non_square() {
        assert!(matches!(
            mat_exp(&CMat::zeros(2, 3), 1.0),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn su2_closed_form_matches_series() {
        let mut rng = seeded_rng(3);
        for _ in 0..20 {
            let x = random_anti_hermitian(2, 2.5, &mut rng);
            let t = uniform(&mut rng, -2.0, 2.0);
            let a = mat_exp(&x, t).unwrap();
            let b = from_matrix2(&su2_exp(&to_matrix2(&x), t));
            assert!(frobenius(&(a - b)) < 1e-13);
        }
    }

    #[test]
    fn grid_snaps_endpoint() {
        assert_eq!(uniform_grid(0.0, 1.0, 1e-3).unwrap().len(), 1001);
        let g = uniform_grid(0.0, 1.05, 0.1).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(*g.last().unwrap(), 1.05);
        assert_eq!(uniform_grid(0.0, 0.0, 0.1).unwrap(), vec![0.0]);
        assert!(uniform_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn ode_exponential_growth() {
        let sol = integrate_ode(|_, y, dy| dy[0] = y[0], &[1.0], 0.0, 1.0, 1e-3, |_| true).unwrap();
        assert!((sol.last().y[0] - 1f64.exp()).abs() < 1e-10);
        assert!(sol.exit.is_none());
    }

    #[test]
    fn ode_constant_field() {
        let sol = integrate_ode(
            |_, _, dy| dy.fill(0.0),
            &[0.3, -2.0],
            0.0,
            5.0,
            0.1,
            |_| true,
        )
        .unwrap();
        assert!(sol.samples.iter().all(|s| s.y == vec![0.3, -2.0]));
    }

    #[test]
    fn ode_domain_exit_bisects_boundary() {
        // y' = 1 from 0, region y < 0.55
        let sol = integrate_ode(
            |_, _, dy| dy[0] = 1.0,
            &[0.0],
            0.0,
            1.0,
            0.1,
            |y| y[0] < 0.55,
        )
        .unwrap();
        let exit = sol.exit.as_ref().unwrap();
        assert!((exit.last_valid.t - 0.55).abs() < 1e-12);
        assert!((exit.rejected_time - 0.6).abs() < 1e-12);
        assert_eq!(sol.last().t, exit.last_valid.t);
    }

    #[test]
    fn gram_schmidt_gives_unitary() {
        let mut rng = seeded_rng(11);
        let u = random_unitary(5, &mut rng);
        assert!(frobenius(&(u.adjoint() * &u - CMat::identity(5, 5))) < 1e-13);
        let s = random_special_unitary(4, &mut rng);
        assert!((s.determinant() - ONE).norm() < 1e-13);
    }
}
