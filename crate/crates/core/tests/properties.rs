//! Property-based invariants over parameters, seeds and flow times.

use std::sync::Arc;

use nalgebra::Vector3;
use proptest::prelude::*;

use qsphere::kw::{group_law_error, kw_pairing, kw_scale, KillingField, PullbackFamily};
use qsphere::qops::{q_increment, self_adjointness_defect};
use qsphere::random::random_zonal;
use qsphere::spectra::{admissible, l_multiplier, p0_eval, p0_polynomial, p0_ratio, SphereParams};
use qsphere::sphere2::{random_rotation, Sphere2Basis, Sphere2Field};
use qsphere::{ExactRational, ZonalBasis, ZonalField};

fn admissible_pair() -> impl Strategy<Value = SphereParams> {
    (1u32..=6, 2u32..=14)
        .prop_filter("admissible", |&(m, n)| admissible(m, n))
        .prop_map(|(m, n)| SphereParams::new(m, n).unwrap())
}

const PAIRS: [(u32, u32); 4] = [(1, 2), (1, 3), (2, 4), (2, 5)];

fn basis(idx: usize, lmax: usize) -> Arc<ZonalBasis> {
    let (m, n) = PAIRS[idx];
    ZonalBasis::new(SphereParams::new(m, n).unwrap(), lmax, 5.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_polynomial_and_ratio(p in admissible_pair(), i in 0u64..80) {
        let lambda = ExactRational::from_integer((i * (i + p.n() as u64 - 1)).into());
        prop_assert_eq!(p0_polynomial(&lambda, &p), p0_eval(i, &p));
        if let Ok(r) = p0_ratio(i, &p) {
            prop_assert_eq!(p0_eval(i + 1, &p), r * p0_eval(i, &p));
        }
        let kernel = l_multiplier(i, &p) == l_multiplier(1, &p);
        prop_assert_eq!(kernel, i == 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthesis_round_trip(idx in 0usize..4, coeffs in prop::collection::vec(-1.0f64..1.0, 17)) {
        let b = basis(idx, 16);
        let f = ZonalField::from_coeffs(&b, coeffs.clone());
        let g = ZonalField::from_grid(&b, f.grid().to_vec());
        for (a, c) in g.coeffs().iter().zip(&coeffs) {
            prop_assert!((a - c).abs() < 1e-13);
        }
    }

    #[test]
    fn kw_vanishes_on_the_graph(idx in 0usize..4, seed in 0u64..1000, amp in 0.01f64..0.2) {
        let b = basis(idx, 16);
        let x = KillingField::axial(&b);
        let u = random_zonal(&b, seed, amp);
        let q = q_increment(&u).unwrap();
        prop_assert!(kw_pairing(&u, &q, &x).unwrap().abs() <= 1e-8 * kw_scale(&q, &x));
    }

    #[test]
    fn linearization_symmetric(idx in 0usize..4, seed in 0u64..1000) {
        let b = basis(idx, 16);
        let u = random_zonal(&b, seed, 0.2);
        let v = random_zonal(&b, seed + 1, 1.0);
        let w = random_zonal(&b, seed + 2, 1.0);
        prop_assert!(self_adjointness_defect(&u, &v, &w).unwrap() <= 1e-9);
    }

    #[test]
    fn pullback_is_flat_and_a_flow(idx in 0usize..4, t in -0.3f64..0.3, s in -0.3f64..0.3) {
        let b = basis(idx, 24);
        let q = q_increment(&PullbackFamily::new(&b, t).u_t()).unwrap();
        prop_assert!(q.norm() <= 1e-10, "{:e}", q.norm());
        prop_assert!(group_law_error(&b, t, s) <= 1e-10);
    }

    #[test]
    fn rotation_acts_on_linear_fields(seed in 0u64..1000, dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0) {
        let b = Sphere2Basis::new(8, 3.0).unwrap();
        let d = Vector3::new(dx, dy, dz);
        let r = random_rotation(seed);
        let rotated = Sphere2Field::linear(&b, &d).rotated(&r);
        let expected = Sphere2Field::linear(&b, &(r.transpose() * d));
        prop_assert!(rotated.distance(&expected) <= 1e-12 * (1.0 + d.norm()));
    }
}
