use std::f64::consts::PI;

use proptest::prelude::*;
use twistshear::algebra2d::{winding_index, winding_number, Mat2, PlanarCurve, Vec2};

fn mat() -> impl Strategy<Value = Mat2> {
    (prop::array::uniform4(-1.0f64..1.0), -3.0f64..3.0).prop_map(|(e, s)| Mat2(e).scale(10f64.powf(s)))
}

fn close(a: &Mat2, b: &Mat2, scale: f64) -> bool {
    (*a - *b).norm_sq().sqrt() <= 1e-14 * scale
}

/// k-fold loop with radial wobble and a smooth reparametrization.
fn loop_curve(k: i64, wobble: f64, freq: f64, phase: f64) -> PlanarCurve {
    let m = 64 + 32 * k.unsigned_abs() as usize;
    let pts = (0..m)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / m as f64;
            (1.0 + wobble * (freq * t + phase).sin()) * Vec2::e_r(k as f64 * t + 0.3 * (t + phase).sin())
        })
        .collect();
    PlanarCurve::from_open(pts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn hadamard_and_norm_bounds(a in mat()) {
        let n2 = a.norm_sq();
        let c1 = Vec2::new(a.get(0, 0), a.get(1, 0)).norm();
        let c2 = Vec2::new(a.get(0, 1), a.get(1, 1)).norm();
        prop_assert!(a.det().abs() <= c1 * c2 * (1.0 + 1e-15));
        prop_assert!(a.det().abs() <= 0.5 * n2 * (1.0 + 1e-15));
    }

    #[test]
    fn cofactor_identities(a in mat(), b in mat()) {
        let n2 = a.norm_sq();
        prop_assert!(close(&a.matmul(&a.cof().transpose()), &Mat2::IDENTITY.scale(a.det()), n2));
        prop_assert!((a.cof().det() - a.det()).abs() <= 1e-14 * n2);
        prop_assert_eq!(a.cof().cof(), a);
        prop_assert!(close(&a.cof(), &Mat2::J.transpose().matmul(&a).matmul(&Mat2::J), n2.sqrt()));
        let ab = a.matmul(&b);
        let s = (n2 * b.norm_sq()).sqrt();
        prop_assert!(close(&ab.cof(), &a.cof().matmul(&b.cof()), s));
        prop_assert!((ab.det() - a.det() * b.det()).abs() <= 1e-14 * s * s);
        prop_assert!((a.det() - 0.5 * a.frob(&a.cof())).abs() <= 1e-14 * n2);
    }

    #[test]
    fn winding_invariances(
        k in -4i64..=4,
        wobble in 0.0f64..0.6,
        freq in 1u32..6,
        phase in 0.0f64..(2.0 * PI),
        shift in 0usize..1000,
        alpha in 0.0f64..(2.0 * PI),
        scale in -3.0f64..3.0,
    ) {
        let c = loop_curve(k, wobble, freq as f64, phase);
        let w = winding_number(&c).unwrap();
        prop_assert!((w - k as f64).abs() < 0.05, "{}", w);
        prop_assert_eq!(winding_index(&c.reversed()).unwrap(), -k);
        let m = c.points().len();
        prop_assert_eq!(winding_index(&c.reindexed(shift % m)).unwrap(), k);
        let (s, rot) = (10f64.powf(scale), Mat2::rotation(alpha));
        prop_assert_eq!(winding_index(&c.map(|p| s * rot.apply(p))).unwrap(), k);
        prop_assert_eq!(winding_index(&c.map(|p| p + Vec2::new(5.0, 0.0))).unwrap(), 0);
    }
}
