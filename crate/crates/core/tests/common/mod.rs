//! Reference computations that do not go through the code under test.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

pub type C = Complex64;
/// Row-major 2x2 complex matrix.
pub type M = [[C; 2]; 2];

pub fn cx(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn mul(a: &M, b: &M) -> M {
    let mut out = [[cx(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn p1() -> M {
    [[cx(0.0, 0.0), cx(1.0, 0.0)], [cx(-1.0, 0.0), cx(0.0, 0.0)]]
}

pub fn p2() -> M {
    [[cx(0.0, 0.0), cx(0.0, 1.0)], [cx(0.0, 1.0), cx(0.0, 0.0)]]
}

/// `-1/2 Re tr(PQ)`.
pub fn half_trace_inner(p: &M, q: &M) -> f64 {
    let m = mul(p, q);
    -0.5 * (m[0][0] + m[1][1]).re
}

pub fn su2_point(x: f64, y: f64) -> M {
    let z = cx(x, y);
    let w = cx((1.0 - z.norm_sqr()).sqrt(), 0.0);
    [[z, w], [-w.conj(), z.conj()]]
}

/// Metric by inverting the projection differential on span(P1, P2) at the
/// fiber point with real positive `w`.
pub fn metric_by_inversion(x: f64, y: f64) -> [[f64; 2]; 2] {
    let q = su2_point(x, y);
    let basis = [p1(), p2()];
    let cols: Vec<C> = basis.iter().map(|p| mul(p, &q)[0][0]).collect();
    let (a, b, c, d) = (cols[0].re, cols[1].re, cols[0].im, cols[1].im);
    let det = a * d - b * c;
    let inv = [[d / det, -b / det], [-c / det, a / det]];
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    g[i][j] += inv[k][i] * inv[l][j] * half_trace_inner(&basis[k], &basis[l]);
                }
            }
        }
    }
    g
}

fn d5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

fn inv2(g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    [
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ]
}

/// `gamma[i][k][l]` = Gamma^i_{kl} from finite differences of the metric.
pub fn fd_christoffel(x: f64, y: f64, h: f64) -> [[[f64; 2]; 2]; 2] {
    let g = metric_by_inversion(x, y);
    let gi = inv2(&g);
    // dg[m][i][j] = d_m g_ij
    let dg: [[[f64; 2]; 2]; 2] = [
        std::array::from_fn(|i| {
            std::array::from_fn(|j| d5(|s| metric_by_inversion(s, y)[i][j], x, h))
        }),
        std::array::from_fn(|i| {
            std::array::from_fn(|j| d5(|s| metric_by_inversion(x, s)[i][j], y, h))
        }),
    ];
    let mut out = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            for l in 0..2 {
                for m in 0..2 {
                    out[i][k][l] += 0.5 * gi[i][m] * (dg[l][m][k] + dg[k][m][l] - dg[m][k][l]);
                }
            }
        }
    }
    out
}

/// Sectional curvature `(1 - r^2) R^y_{xyx}` with Christoffel symbols and
/// their derivatives all taken numerically.
pub fn fd_curvature(x: f64, y: f64) -> f64 {
    const X: usize = 0;
    const Y: usize = 1;
    let h = 1e-3;
    let g = fd_christoffel(x, y, h);
    let dy_gyxx = d5(|s| fd_christoffel(x, s, h)[Y][X][X], y, h);
    let dx_gyyx = d5(|s| fd_christoffel(s, y, h)[Y][Y][X], x, h);
    let r = g[X][X][X] * g[Y][Y][X] + g[Y][X][X] * g[Y][Y][Y]
        - (g[X][Y][X] * g[Y][X][X] + g[Y][Y][X] * g[Y][X][Y])
        + dy_gyxx
        - dx_gyyx;
    let metric = metric_by_inversion(x, y);
    r / metric[Y][Y]
}

/// `z(t)` of `e^{At} e^{(P-A)t}` for `A = alpha diag(i, -i)` and unit `P`
/// of any phase.
pub fn z_closed_form(alpha: f64, t: f64) -> C {
    let w = (1.0 + alpha * alpha).sqrt();
    cx(0.0, alpha * t).exp() * cx((w * t).cos(), -alpha * (w * t).sin() / w)
}

pub fn hit_time_closed_form(alpha: f64) -> f64 {
    PI / (1.0 + alpha * alpha).sqrt()
}

/// Taylor series of `e^{tX}` with plenty of terms, for modest `|tX|`.
pub fn exp_taylor(x: &kpsr::numerics::CMat, t: f64, terms: usize) -> kpsr::numerics::CMat {
    let n = x.nrows();
    let mut sum = kpsr::numerics::CMat::identity(n, n);
    let mut term = sum.clone();
    for k in 1..terms {
        term = &term * x * cx(t / k as f64, 0.0);
        sum += &term;
    }
    sum
}

/// Killing form `tr(ad_X ad_Y)` on su(n), computed from explicit
/// adjoint matrices.
pub fn killing_by_ad(x: &kpsr::numerics::CMat, y: &kpsr::numerics::CMat) -> f64 {
    let basis = su_basis(x.nrows());
    trace_of_ad_product(&ad_matrix(x, &basis), &ad_matrix(y, &basis))
}

/// Orthonormal basis of su(n) for the real inner product Re tr(A^* B).
pub fn su_basis(n: usize) -> Vec<kpsr::numerics::CMat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let mut re = kpsr::numerics::CMat::zeros(n, n);
            re[(a, b)] = cx(s, 0.0);
            re[(b, a)] = cx(-s, 0.0);
            let mut im = kpsr::numerics::CMat::zeros(n, n);
            im[(a, b)] = cx(0.0, s);
            im[(b, a)] = cx(0.0, s);
            out.push(re);
            out.push(im);
        }
    }
    for l in 1..n {
        let w = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut h = kpsr::numerics::CMat::zeros(n, n);
        for i in 0..l {
            h[(i, i)] = cx(0.0, w);
        }
        h[(l, l)] = cx(0.0, -(l as f64) * w);
        out.push(h);
    }
    out
}

/// `ad_X` in an orthonormal basis of su(n): `out[j][i]` is coordinate `i`
/// of `[X, b_j]`.
pub fn ad_matrix(x: &kpsr::numerics::CMat, basis: &[kpsr::numerics::CMat]) -> Vec<Vec<f64>> {
    basis
        .iter()
        .map(|b| {
            let m = x * b - b * x;
            basis
                .iter()
                .map(|e| (e.adjoint() * &m).trace().re)
                .collect()
        })
        .collect()
}

/// `tr(ad_X ad_Y)` from two matrices produced by [`ad_matrix`].
pub fn trace_of_ad_product(ax: &[Vec<f64>], ay: &[Vec<f64>]) -> f64 {
    let d = ax.len();
    let mut tr = 0.0;
    for i in 0..d {
        for j in 0..d {
            tr += ax[j][i] * ay[i][j];
        }
    }
    tr
}
