//! su(n) machinery: algebra and group elements, the bi-invariant inner
//! product, the AIII block split, conjugation and isotropy computations.

use std::f64::consts::SQRT_2;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Subspace};
use crate::numerics::{
    self, c, ensure_square, frobenius, gram_schmidt, random_gaussian_matrix, realify, seeded_rng,
    trace, trace_of_product, uniform, CMat, SeededRng, I, ONE, ZERO,
};

/// Tolerance on anti-Hermiticity and trace, relative to `max(1, |M|)`.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance on unitarity and determinant.
pub const GROUP_TOL: f64 = 1e-10;
/// Default singular-value cutoff for isotropy null spaces.
pub const NULL_SPACE_TOL: f64 = 1e-8;
/// Killing-form multiple for which the SU(2) quotient metric is `delta/(1 - r^2)`.
pub const SU2_KILLING_SCALE: f64 = 0.5;
pub const DEFAULT_WITNESS_SEED: u64 = 0x5eed_a111;

/// Element of su(n): an anti-Hermitian, traceless matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement(CMat);

impl AlgebraElement {
    pub fn new(m: CMat) -> Result<Self> {
        ensure_square(&m)?;
        let scale = frobenius(&m).max(1.0);
        let skew = frobenius(&(&m + m.adjoint()));
        if !(skew <= ALGEBRA_TOL * scale) {
            return Err(Error::NotAntiHermitian { residual: skew });
        }
        let tr = trace(&m).norm();
        if !(tr <= ALGEBRA_TOL * scale) {
            return Err(Error::NotTraceless { residual: tr });
        }
        Ok(Self(m))
    }

    /// Nearest element of su(n) in Frobenius norm: skew-Hermitian part with
    /// the trace removed. Used for finite-difference velocities.
    pub fn project(m: &CMat) -> Result<Self> {
        let n = ensure_square(m)?;
        let mut x = (m - m.adjoint()) * c(0.5, 0.0);
        let tr = trace(&x) / c(n as f64, 0.0);
        for i in 0..n {
            x[(i, i)] -= tr;
        }
        Ok(Self(x))
    }

    pub fn zero(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn norm_frobenius(&self) -> f64 {
        frobenius(&self.0)
    }

    pub fn bracket(&self, other: &Self) -> Self {
        Self(numerics::commutator(&self.0, &other.0))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(&self.0 * c(s, 0.0))
    }

    pub fn exp(&self, t: f64) -> GroupElement {
        GroupElement(numerics::mat_exp(&self.0, t).expect("algebra elements are square"))
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> AlgebraElement {
        AlgebraElement(&self.0 + &rhs.0)
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> AlgebraElement {
        AlgebraElement(&self.0 - &rhs.0)
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        AlgebraElement(-&self.0)
    }
}

impl Mul<f64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: f64) -> AlgebraElement {
        self.scaled(rhs)
    }
}

/// Element of SU(n).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement(CMat);

impl GroupElement {
    pub fn new(m: CMat) -> Result<Self> {
        let n = ensure_square(&m)?;
        let unitarity = frobenius(&(m.adjoint() * &m - CMat::identity(n, n)));
        if !(unitarity < GROUP_TOL) {
            return Err(Error::NotUnitary {
                residual: unitarity,
            });
        }
        let det = (m.determinant() - ONE).norm();
        if !(det < GROUP_TOL) {
            return Err(Error::NotSpecial { residual: det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix known to be special unitary up to roundoff (products
    /// and exponentials of validated inputs).
    pub(crate) fn from_trusted(m: CMat) -> Self {
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    pub fn unitarity_residual(&self) -> f64 {
        let n = self.n();
        frobenius(&(self.0.adjoint() * &self.0 - CMat::identity(n, n)))
    }

    pub fn determinant_residual(&self) -> f64 {
        (self.0.determinant() - ONE).norm()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        frobenius(&(&self.0 - &other.0))
    }
}

fn check_same_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// `scale * (-Re tr(P Q))`, a positive multiple of the negative Killing form.
/// On su(n) the Killing form itself is `2n tr(PQ)`.
pub fn killing_inner(p: &AlgebraElement, q: &AlgebraElement, scale: f64) -> Result<f64> {
    check_same_n(p.n(), q.n())?;
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Killing scale must be positive, got {scale}"
        )));
    }
    Ok(-scale * trace_of_product(&p.0, &q.0).re)
}

fn check_q(n: usize, q: usize) -> Result<()> {
    if q == 0 || 2 * q > n {
        return Err(Error::InvalidDecomposition { n, q });
    }
    Ok(())
}

/// Block-diagonal and block-anti-diagonal parts of an arbitrary square matrix.
pub(crate) fn block_parts(m: &CMat, q: usize) -> (CMat, CMat) {
    let n = m.nrows();
    let mut k = CMat::zeros(n, n);
    let mut p = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if (i < q) == (j < q) {
                k[(i, j)] = m[(i, j)];
            } else {
                p[(i, j)] = m[(i, j)];
            }
        }
    }
    (k, p)
}

/// Splits `X = X_K + X_P` into its block-diagonal (q, n-q) and
/// block-anti-diagonal parts.
pub fn aiii_split(x: &AlgebraElement, q: usize) -> Result<(AlgebraElement, AlgebraElement)> {
    check_q(x.n(), q)?;
    let (k, p) = block_parts(&x.0, q);
    Ok((AlgebraElement(k), AlgebraElement(p)))
}

/// AIII Cartan decomposition `su(n) = K + P` with orthonormal bases.
///
/// Basis order, fixed so that coefficient vectors are stable:
/// * `K`: off-diagonal generators of the upper-left q-block, then of the
///   lower-right block (each position row-major, real generator
///   `E_ab - E_ba` before imaginary `i(E_ab + E_ba)`), then the n-1 diagonal
///   generalized Gell-Mann generators.
/// * `P`: for each position `(a, b)`, `a < q <= b`, row-major, the real
///   generator before the imaginary one.
#[derive(Debug, Clone)]
pub struct KpDecomposition {
    n: usize,
    q: usize,
    killing_scale: f64,
    basis_k: Vec<AlgebraElement>,
    basis_p: Vec<AlgebraElement>,
}

pub fn make_aiii(n: usize, q: usize, scale: f64) -> Result<KpDecomposition> {
    KpDecomposition::aiii(n, q, scale)
}

impl KpDecomposition {
    pub fn aiii(n: usize, q: usize, killing_scale: f64) -> Result<Self> {
        check_q(n, q)?;
        if !(killing_scale > 0.0) || !killing_scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Killing scale must be positive, got {killing_scale}"
            )));
        }
        let off_norm = 1.0 / (2.0 * killing_scale).sqrt();
        let pair = |a: usize, b: usize| -> [AlgebraElement; 2] {
            let mut re = CMat::zeros(n, n);
            re[(a, b)] = c(off_norm, 0.0);
            re[(b, a)] = c(-off_norm, 0.0);
            let mut im = CMat::zeros(n, n);
            im[(a, b)] = c(0.0, off_norm);
            im[(b, a)] = c(0.0, off_norm);
            [AlgebraElement(re), AlgebraElement(im)]
        };

        let mut basis_k = Vec::with_capacity(n * n - 1 - 2 * q * (n - q));
        for (lo, hi) in [(0, q), (q, n)] {
            for a in lo..hi {
                for b in a + 1..hi {
                    basis_k.extend(pair(a, b));
                }
            }
        }
        for l in 1..n {
            let w = 1.0 / (killing_scale * (l * (l + 1)) as f64).sqrt();
            let mut h = CMat::zeros(n, n);
            for i in 0..l {
                h[(i, i)] = c(0.0, w);
            }
            h[(l, l)] = c(0.0, -(l as f64) * w);
            basis_k.push(AlgebraElement(h));
        }

        let mut basis_p = Vec::with_capacity(2 * q * (n - q));
        for a in 0..q {
            for b in q..n {
                basis_p.extend(pair(a, b));
            }
        }
        Ok(Self {
            n,
            q,
            killing_scale,
            basis_k,
            basis_p,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn killing_scale(&self) -> f64 {
        self.killing_scale
    }

    pub fn basis_k(&self) -> &[AlgebraElement] {
        &self.basis_k
    }

    pub fn basis_p(&self) -> &[AlgebraElement] {
        &self.basis_p
    }

    pub fn dim_k(&self) -> usize {
        self.basis_k.len()
    }

    pub fn dim_p(&self) -> usize {
        self.basis_p.len()
    }

    /// Inner product under this decomposition's Killing scale.
    pub fn inner(&self, a: &AlgebraElement, b: &AlgebraElement) -> f64 {
        -self.killing_scale * trace_of_product(&a.0, &b.0).re
    }

    pub fn norm(&self, a: &AlgebraElement) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    pub fn split(&self, x: &AlgebraElement) -> Result<(AlgebraElement, AlgebraElement)> {
        check_same_n(self.n, x.n())?;
        aiii_split(x, self.q)
    }

    /// Frobenius norm of the component of `x` outside `subspace`.
    pub fn subspace_residual(&self, x: &AlgebraElement, subspace: Subspace) -> Result<f64> {
        let (k, p) = self.split(x)?;
        Ok(match subspace {
            Subspace::K => p.norm_frobenius(),
            Subspace::P => k.norm_frobenius(),
        })
    }

    pub fn ensure_in(&self, x: &AlgebraElement, subspace: Subspace, tol: f64) -> Result<()> {
        let residual = self.subspace_residual(x, subspace)?;
        if !(residual <= tol * x.norm_frobenius().max(1.0)) {
            return Err(Error::NotInSubspace { subspace, residual });
        }
        Ok(())
    }

    pub fn k_coords(&self, x: &AlgebraElement) -> Vec<f64> {
        self.basis_k.iter().map(|b| self.inner(x, b)).collect()
    }

    pub fn p_coords(&self, x: &AlgebraElement) -> Vec<f64> {
        self.basis_p.iter().map(|b| self.inner(x, b)).collect()
    }

    fn combine(&self, basis: &[AlgebraElement], coords: &[f64]) -> AlgebraElement {
        let mut m = CMat::zeros(self.n, self.n);
        for (b, &w) in basis.iter().zip(coords) {
            m += &b.0 * c(w, 0.0);
        }
        AlgebraElement(m)
    }

    pub fn k_from_coords(&self, coords: &[f64]) -> AlgebraElement {
        self.combine(&self.basis_k, coords)
    }

    pub fn p_from_coords(&self, coords: &[f64]) -> AlgebraElement {
        self.combine(&self.basis_p, coords)
    }

    /// Random element of `K` with the given Killing norm.
    pub fn random_k(&self, norm: f64, rng: &mut SeededRng) -> AlgebraElement {
        let coords = random_direction(self.dim_k(), norm, rng);
        self.k_from_coords(&coords)
    }

    /// Random element of `P` with the given Killing norm.
    pub fn random_p(&self, norm: f64, rng: &mut SeededRng) -> AlgebraElement {
        let coords = random_direction(self.dim_p(), norm, rng);
        self.p_from_coords(&coords)
    }

    /// Random element of the subgroup `K = exp(K)`.
    pub fn random_group_k(&self, rng: &mut SeededRng) -> GroupElement {
        let norm = uniform(rng, 0.0, 2.0 * std::f64::consts::PI);
        self.random_k(norm, rng).exp(1.0)
    }

    pub fn is_block_diagonal(&self, m: &CMat, tol: f64) -> bool {
        frobenius(&block_parts(m, self.q).1) <= tol
    }
}

fn random_direction(dim: usize, norm: f64, rng: &mut SeededRng) -> Vec<f64> {
    use rand::RngExt;
    let v: Vec<f64> = (0..dim)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if len == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x * norm / len).collect()
}

/// Things the conjugation action `x -> k x k^{-1}` applies to.
pub trait Conjugate: Sized {
    fn conjugated_by(&self, k: &GroupElement) -> Result<Self>;
}

impl Conjugate for AlgebraElement {
    fn conjugated_by(&self, k: &GroupElement) -> Result<Self> {
        check_same_n(k.n(), self.n())?;
        Ok(AlgebraElement(&k.0 * &self.0 * k.0.adjoint()))
    }
}

impl Conjugate for GroupElement {
    fn conjugated_by(&self, k: &GroupElement) -> Result<Self> {
        check_same_n(k.n(), self.n())?;
        Ok(GroupElement(&k.0 * &self.0 * k.0.adjoint()))
    }
}

pub fn conjugate<T: Conjugate>(k: &GroupElement, x: &T) -> Result<T> {
    x.conjugated_by(k)
}

/// Singular values, descending, of `A -> x A x^{-1} - A` restricted to `K`
/// (columns indexed by `basis_k`, rows by the real coordinates of `n x n`
/// complex matrices).
pub fn isotropy_singular_values(x: &GroupElement, dec: &KpDecomposition) -> Result<Vec<f64>> {
    check_same_n(dec.n(), x.n())?;
    let n = dec.n();
    let rows = 2 * n * n;
    let mut map = DMatrix::<f64>::zeros(rows, dec.dim_k());
    let xinv = x.0.adjoint();
    for (col, b) in dec.basis_k().iter().enumerate() {
        let image = &x.0 * &b.0 * &xinv - &b.0;
        for (row, v) in realify(&image).into_iter().enumerate() {
            map[(row, col)] = v;
        }
    }
    let mut sv: Vec<f64> = map
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Dimension of `{A in K : x A x^{-1} = A}`, the Lie algebra of the isotropy
/// group of `x` under conjugation by `K`.
pub fn isotropy_algebra_dim(x: &GroupElement, dec: &KpDecomposition, tol: f64) -> Result<usize> {
    let sv = isotropy_singular_values(x, dec)?;
    Ok(sv.iter().filter(|&&s| s < tol).count())
}

/// Regular means minimal (discrete) isotropy, i.e. a trivial isotropy algebra.
pub fn is_regular(x: &GroupElement, dec: &KpDecomposition, tol: f64) -> Result<bool> {
    Ok(isotropy_algebra_dim(x, dec, tol)? == 0)
}

/// Parameters of the block layout `n = kq + j` used by the witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessLayout {
    pub blocks: usize,
    pub remainder: usize,
}

impl WitnessLayout {
    pub fn new(n: usize, q: usize) -> Result<Self> {
        check_q(n, q)?;
        Ok(Self {
            blocks: n / q,
            remainder: n % q,
        })
    }
}

/// A special unitary element of SU(n) with discrete isotropy in `K`, built
/// as `F_1 ... F_{k-2} F_{k-1}` where `F_l = A_l P_l`:
///
/// * `A_l` mixes q-blocks `l` and `l+1` with `[[1, 1], [-1, 1]] / sqrt 2`;
/// * `P_l` (l <= k-2) carries a seeded SU(q) matrix in block `l`;
/// * the last factor carries `diag(P_{k-1}, T)` over the final `2q + j`
///   rows, with `P_{k-1}` a diagonal unitary of distinct phases, `T`
///   a seeded unitary whose top-left block has a nonvanishing first row off
///   the diagonal and whose top-right `q x j` block has full column rank.
///
/// Each requirement is checked numerically; on failure the next seed is tried.
pub fn aiii_regular_witness(n: usize, q: usize, seed: u64) -> Result<GroupElement> {
    let layout = WitnessLayout::new(n, q)?;
    let dec = KpDecomposition::aiii(n, q, SU2_KILLING_SCALE)?;
    const ATTEMPTS: u32 = 32;
    for attempt in 0..ATTEMPTS {
        let mut rng = seeded_rng(seed.wrapping_add(attempt as u64));
        if let Some(w) = try_witness(n, q, layout, &mut rng) {
            if is_regular(&w, &dec, NULL_SPACE_TOL)? {
                return Ok(w);
            }
        }
    }
    Err(Error::WitnessConstruction { attempts: ATTEMPTS })
}

fn block_mixer(n: usize, q: usize, l: usize) -> CMat {
    let h = c(1.0 / SQRT_2, 0.0);
    let mut a = CMat::identity(n, n);
    for m in 0..q {
        let (i, j) = (l * q + m, (l + 1) * q + m);
        a[(i, i)] = h;
        a[(i, j)] = h;
        a[(j, i)] = -h;
        a[(j, j)] = h;
    }
    a
}

fn try_witness(
    n: usize,
    q: usize,
    layout: WitnessLayout,
    rng: &mut SeededRng,
) -> Option<GroupElement> {
    let WitnessLayout {
        blocks: k,
        remainder: j,
    } = layout;
    const MARGIN: f64 = 1e-3;
    let mut product = CMat::identity(n, n);
    let mut det = ONE;

    for l in 0..k.saturating_sub(2) {
        let block = numerics::random_special_unitary(q, rng);
        det *= block.determinant();
        let mut hat = CMat::identity(n, n);
        hat.view_mut((l * q, l * q), (q, q)).copy_from(&block);
        product = product * block_mixer(n, q, l) * hat;
    }

    // distinct diagonal phases
    let phases: Vec<Complex64> = (0..q)
        .map(|_| (I * uniform(rng, 0.0, 2.0 * std::f64::consts::PI)).exp())
        .collect();
    for a in 0..q {
        for b in a + 1..q {
            if (phases[a] - phases[b]).norm() < MARGIN {
                return None;
            }
        }
    }
    let mut t = gram_schmidt(&random_gaussian_matrix(q + j, q + j, rng));
    let phase_det: Complex64 = phases.iter().product();
    let fix = (det * phase_det * t.determinant()).conj();
    let fix = fix / fix.norm();
    for r in 0..q + j {
        t[(r, q + j - 1)] *= fix;
    }
    // nonzero off-diagonal first row of T11
    if (1..q).any(|b| t[(0, b)].norm() < MARGIN) {
        return None;
    }
    // T12 has a left inverse
    if j > 0 {
        let t12 = t.view((0, q), (q, j)).clone_owned();
        let smallest = t12
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if smallest < MARGIN {
            return None;
        }
    }

    let base = (k - 2) * q;
    let mut hat = CMat::identity(n, n);
    for (m, p) in phases.iter().enumerate() {
        hat[(base + m, base + m)] = *p;
    }
    hat.view_mut((base + q, base + q), (q + j, q + j))
        .copy_from(&t);
    product = product * block_mixer(n, q, k - 2) * hat;

    let g = GroupElement(product);
    if g.unitarity_residual() > GROUP_TOL || g.determinant_residual() > GROUP_TOL {
        return None;
    }
    Some(g)
}

/// Convenience: `diag(e^{i theta}, e^{-i theta})`.
pub fn su2_diagonal(theta: f64) -> GroupElement {
    let mut m = CMat::zeros(2, 2);
    m[(0, 0)] = (I * theta).exp();
    m[(1, 1)] = (-I * theta).exp();
    GroupElement(m)
}

/// `[[z, w], [-conj w, conj z]]`, the generic SU(2) element.
pub fn su2_from_zw(z: Complex64, w: Complex64) -> Result<GroupElement> {
    GroupElement::new(numerics::from_rows(&[
        vec![z, w],
        vec![-w.conj(), z.conj()],
    ])?)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<KpDecomposition>();
    check::<AlgebraElement>();
    check::<GroupElement>();
    let _ = ZERO;
}
