mod common;

use kpsr::lie::{
    aiii_regular_witness, conjugate, isotropy_algebra_dim, killing_inner, su2_diagonal,
    KpDecomposition, NULL_SPACE_TOL, SU2_KILLING_SCALE,
};
use kpsr::numerics::{c, frobenius, mat_exp, random_anti_hermitian, seeded_rng, trace_of_product};
use kpsr::{AlgebraElement, Error, GroupElement, Subspace};

const SPLITTINGS: [(usize, usize); 6] = [(2, 1), (3, 1), (4, 1), (4, 2), (5, 2), (6, 3)];

#[test]
fn exp_agrees_with_taylor_series() {
    let mut rng = seeded_rng(11);
    for n in 2..=5 {
        let x = random_anti_hermitian(n, 1.5, &mut rng);
        for t in [0.0, 0.3, -0.7, 1.0] {
            let err = frobenius(&(mat_exp(&x, t).unwrap() - common::exp_taylor(&x, t, 40)));
            assert!(err < 1e-12, "n = {n}, t = {t}: {err:e}");
        }
    }
}

#[test]
fn exp_of_algebra_lands_in_group() {
    let mut rng = seeded_rng(12);
    for n in 2..=6 {
        let x = AlgebraElement::new(random_anti_hermitian(n, 3.0, &mut rng)).unwrap();
        let g = x.exp(1.0);
        assert!(g.unitarity_residual() < 1e-12);
        assert!(g.determinant_residual() < 1e-12);
    }
}

#[test]
fn killing_form_is_2n_trace() {
    let mut rng = seeded_rng(13);
    for n in 2..=4 {
        let x = random_anti_hermitian(n, 1.0, &mut rng);
        let y = random_anti_hermitian(n, 1.0, &mut rng);
        let b = common::killing_by_ad(&x, &y);
        let expected = 2.0 * n as f64 * trace_of_product(&x, &y).re;
        assert!((b - expected).abs() < 1e-10, "n = {n}: {b} vs {expected}");
    }
}

#[test]
fn bases_are_orthonormal_and_complete() {
    for (n, q) in SPLITTINGS {
        let dec = KpDecomposition::aiii(n, q, SU2_KILLING_SCALE).unwrap();
        assert_eq!(dec.dim_k() + dec.dim_p(), n * n - 1);
        assert_eq!(dec.dim_p(), 2 * q * (n - q));
        let all: Vec<&AlgebraElement> = dec.basis_k().iter().chain(dec.basis_p()).collect();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let g = dec.inner(a, b);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12, "({n},{q}) <{i}|{j}> = {g}");
            }
        }
    }
}

#[test]
fn cartan_bracket_relations() {
    let mut rng = seeded_rng(14);
    for (n, q) in SPLITTINGS {
        let dec = KpDecomposition::aiii(n, q, SU2_KILLING_SCALE).unwrap();
        for _ in 0..5 {
            let (k1, k2) = (dec.random_k(1.0, &mut rng), dec.random_k(1.0, &mut rng));
            let (p1, p2) = (dec.random_p(1.0, &mut rng), dec.random_p(1.0, &mut rng));
            for (x, sub) in [
                (k1.bracket(&k2), Subspace::K),
                (k1.bracket(&p1), Subspace::P),
                (p1.bracket(&p2), Subspace::K),
            ] {
                assert!(dec.subspace_residual(&x, sub).unwrap() < 1e-12);
            }
            assert!(dec.inner(&k1, &p1).abs() < 1e-12);
        }
    }
}

#[test]
fn inner_product_is_conjugation_invariant() {
    let mut rng = seeded_rng(15);
    let dec = KpDecomposition::aiii(4, 2, SU2_KILLING_SCALE).unwrap();
    let k = dec.random_group_k(&mut rng);
    let (p, q) = (dec.random_p(1.3, &mut rng), dec.random_p(0.4, &mut rng));
    let before = killing_inner(&p, &q, SU2_KILLING_SCALE).unwrap();
    let after = killing_inner(
        &conjugate(&k, &p).unwrap(),
        &conjugate(&k, &q).unwrap(),
        SU2_KILLING_SCALE,
    )
    .unwrap();
    assert!((before - after).abs() < 1e-12);
    assert!(
        dec.subspace_residual(&conjugate(&k, &p).unwrap(), Subspace::P)
            .unwrap()
            < 1e-12
    );
}

#[test]
fn split_recovers_the_original() {
    let mut rng = seeded_rng(16);
    let dec = KpDecomposition::aiii(5, 2, SU2_KILLING_SCALE).unwrap();
    let x = AlgebraElement::new(random_anti_hermitian(5, 2.0, &mut rng)).unwrap();
    let (k, p) = dec.split(&x).unwrap();
    assert!(frobenius(&(k.matrix() + p.matrix() - x.matrix())) < 1e-14);
    let rebuilt = dec.k_from_coords(&dec.k_coords(&k));
    assert!(frobenius(&(rebuilt.matrix() - k.matrix())) < 1e-12);
    let rebuilt = dec.p_from_coords(&dec.p_coords(&p));
    assert!(frobenius(&(rebuilt.matrix() - p.matrix())) < 1e-12);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(matches!(
        KpDecomposition::aiii(4, 3, 0.5),
        Err(Error::InvalidDecomposition { .. })
    ));
    assert!(matches!(
        KpDecomposition::aiii(3, 0, 0.5),
        Err(Error::InvalidDecomposition { .. })
    ));
    let hermitian = kpsr::numerics::from_rows(&[
        vec![c(1.0, 0.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), c(-1.0, 0.0)],
    ])
    .unwrap();
    assert!(matches!(
        AlgebraElement::new(hermitian.clone()),
        Err(Error::NotAntiHermitian { .. })
    ));
    assert!(GroupElement::new(hermitian * c(2.0, 0.0)).is_err());
}

#[test]
fn su2_isotropy_of_diagonal_and_generic_points() {
    let dec = KpDecomposition::aiii(2, 1, SU2_KILLING_SCALE).unwrap();
    assert_eq!(
        isotropy_algebra_dim(&su2_diagonal(0.4), &dec, NULL_SPACE_TOL).unwrap(),
        1
    );
    let off = kpsr::lie::su2_from_zw(c(0.3, 0.1), c(0.9f64.sqrt(), 0.0)).unwrap();
    assert_eq!(isotropy_algebra_dim(&off, &dec, NULL_SPACE_TOL).unwrap(), 0);
}

#[test]
fn witnesses_are_regular_and_stay_regular_under_k() {
    let mut rng = seeded_rng(17);
    for (n, q) in [(2, 1), (3, 1), (4, 1), (4, 2), (5, 2), (6, 2)] {
        let dec = KpDecomposition::aiii(n, q, SU2_KILLING_SCALE).unwrap();
        let w = aiii_regular_witness(n, q, 7).unwrap();
        assert!(w.unitarity_residual() < 1e-10);
        assert!(w.determinant_residual() < 1e-10);
        assert_eq!(isotropy_algebra_dim(&w, &dec, NULL_SPACE_TOL).unwrap(), 0);
        let k = dec.random_group_k(&mut rng);
        let moved = conjugate(&k, &w).unwrap();
        assert_eq!(
            isotropy_algebra_dim(&moved, &dec, NULL_SPACE_TOL).unwrap(),
            0
        );
    }
}

#[test]
fn witness_is_deterministic_per_seed() {
    let a = aiii_regular_witness(5, 2, 99).unwrap();
    let b = aiii_regular_witness(5, 2, 99).unwrap();
    assert_eq!(a.matrix(), b.matrix());
}
