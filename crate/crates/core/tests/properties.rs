mod common;

use std::f64::consts::PI;

use proptest::prelude::*;

use kpsr::cut_locus::{family_spec, first_singular_hit, su2_decomposition};
use kpsr::lie::{su2_from_zw, KpDecomposition, SU2_KILLING_SCALE};
use kpsr::numerics::{c, frobenius, seeded_rng};
use kpsr::quotient::{
    lift_tangent, metric_components, project, project_velocity, sectional_curvature, speed_squared,
};
use kpsr::{AlgebraElement, DiscPoint, DiscTangent, GroupElement};

fn disc_point() -> impl Strategy<Value = (f64, f64)> {
    (0.0..0.95f64, 0.0..2.0 * PI).prop_map(|(r, a)| (r * a.cos(), r * a.sin()))
}

fn su2_element(x: f64, y: f64, theta: f64) -> GroupElement {
    let z = c(x, y);
    let w = c(0.0, theta).exp() * (1.0 - z.norm_sqr()).sqrt();
    su2_from_zw(z, w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_stays_in_special_unitary_group(n in 2usize..5, seed in any::<u64>(), norm in 0.0..6.0f64) {
        let mut rng = seeded_rng(seed);
        let x = AlgebraElement::new(kpsr::numerics::random_anti_hermitian(n, norm, &mut rng)).unwrap();
        let g = x.exp(1.0);
        prop_assert!(g.unitarity_residual() < 1e-11);
        prop_assert!(g.determinant_residual() < 1e-11);
    }

    #[test]
    fn split_is_exact_and_orthogonal(seed in any::<u64>(), q in 1usize..3) {
        let n = 2 * q + 1;
        let dec = KpDecomposition::aiii(n, q, SU2_KILLING_SCALE).unwrap();
        let mut rng = seeded_rng(seed);
        let x = AlgebraElement::new(kpsr::numerics::random_anti_hermitian(n, 1.0, &mut rng)).unwrap();
        let (k, p) = dec.split(&x).unwrap();
        prop_assert!(frobenius(&(k.matrix() + p.matrix() - x.matrix())) < 1e-14);
        prop_assert!(dec.inner(&k, &p).abs() < 1e-14);
    }

    #[test]
    fn curvature_is_minus_twice_conformal_factor((x, y) in disc_point()) {
        let p = DiscPoint::new(x, y);
        let g = metric_components(&p).unwrap();
        prop_assert!((sectional_curvature(&p).unwrap() + 2.0 * g[0][0]).abs() < 1e-12 * g[0][0]);
        prop_assert_eq!(g[0][1], 0.0);
    }

    #[test]
    fn metric_is_rotation_invariant((x, y) in disc_point(), phi in 0.0..2.0 * PI) {
        let p = DiscPoint::new(x, y);
        let g = metric_components(&p).unwrap()[0][0];
        let h = metric_components(&p.rotated(phi)).unwrap()[0][0];
        prop_assert!((g - h).abs() < 1e-9 * g);
    }

    #[test]
    fn metric_matches_oracle((x, y) in disc_point()) {
        let g = metric_components(&DiscPoint::new(x, y)).unwrap();
        let want = common::metric_by_inversion(x, y);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((g[i][j] - want[i][j]).abs() < 1e-9 * want[0][0]);
            }
        }
    }

    #[test]
    fn lifted_tangent_projects_back_isometrically(
        (x, y) in disc_point(),
        theta in 0.0..2.0 * PI,
        vx in -2.0..2.0f64,
        vy in -2.0..2.0f64,
    ) {
        let q = su2_element(x, y, theta);
        let v = DiscTangent::new(vx, vy);
        let p = lift_tangent(&q, &v).unwrap();
        let back = project_velocity(&q, &p).unwrap();
        prop_assert!((back.vx - vx).abs() < 1e-9 && (back.vy - vy).abs() < 1e-9);
        let dec = su2_decomposition();
        let norm2 = dec.inner(&p, &p);
        let g2 = speed_squared(&project(&q).unwrap(), &v).unwrap();
        prop_assert!((norm2 - g2).abs() < 1e-8 * g2.max(1.0));
    }

    #[test]
    fn family_projection_is_phase_independent(
        alpha in -3.0..3.0f64,
        phi in 0.0..2.0 * PI,
        t in 0.0..3.0f64,
    ) {
        let spec = family_spec(&su2_decomposition(), alpha, phi, 3.0, 1e-2).unwrap();
        let z = spec.point(t).unwrap().matrix()[(0, 0)];
        prop_assert!((z - common::z_closed_form(alpha, t)).norm() < 1e-12);
    }

    #[test]
    fn first_hit_time_is_pi_over_omega(alpha in -4.0..4.0f64, phi in 0.0..2.0 * PI) {
        let spec = family_spec(&su2_decomposition(), alpha, phi, 1.2 * PI, 1e-3).unwrap();
        let hit = first_singular_hit(&spec, 1e-8).unwrap();
        prop_assert!((hit.time - common::hit_time_closed_form(alpha)).abs() < 1e-9);
    }

    #[test]
    fn group_distance_is_symmetric_and_bounded(
        a in disc_point(), b in disc_point(), s in 0.0..2.0 * PI, t in 0.0..2.0 * PI,
    ) {
        let g = su2_element(a.0, a.1, s);
        let h = su2_element(b.0, b.1, t);
        let d = g.distance(&h);
        prop_assert!((d - h.distance(&g)).abs() < 1e-14);
        prop_assert!(d >= 0.0);
        prop_assert!(g.distance(&g) < 1e-14);
    }
}
