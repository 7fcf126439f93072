use proptest::prelude::*;

use orlicz_ldg::orlicz::{map_f, map_fstar, op_a, op_a_jacobian, op_a_shifted, NFunction, Tensor2};

fn tensor() -> impl Strategy<Value = Tensor2> {
    (prop::array::uniform4(-1.0..1.0f64), -3.0..3.0f64)
        .prop_map(|(v, e)| Tensor2(v).scale(10f64.powf(e)))
}

fn nfunction() -> impl Strategy<Value = NFunction> {
    (1.1..5.0f64, prop_oneof![Just(0.0), 1e-4..1.0f64])
        .prop_map(|(p, d)| NFunction::new(p, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn young_inequality(nf in nfunction(), lt in -5.0..5.0f64, ls in -5.0..5.0f64) {
        let (t, s) = (10f64.powf(lt), 10f64.powf(ls));
        let rhs = nf.phi(t).unwrap() + nf.conjugate_value(s).unwrap();
        prop_assert!(s * t <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn young_equality_on_the_graph(nf in nfunction(), lt in -4.0..4.0f64) {
        let t = 10f64.powf(lt);
        let s = nf.phi_prime(t).unwrap();
        let rhs = nf.phi(t).unwrap() + nf.conjugate_value(s).unwrap();
        prop_assert!((s * t - rhs).abs() <= 1e-9 * s * t);
    }

    #[test]
    fn operator_is_monotone(nf in nfunction(), p in tensor(), q in tensor()) {
        let d = p - q;
        prop_assert!((op_a(&nf, &p) - op_a(&nf, &q)).dot(&d) >= -1e-12 * d.norm() * d.norm());
    }

    #[test]
    fn conjugate_map_inverts_the_flux(nf in nfunction(), p in tensor()) {
        let lhs = map_fstar(&nf, &op_a(&nf, &p));
        let rhs = map_f(&nf, &p);
        prop_assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm().max(1e-300));
    }

    #[test]
    fn unshifted_flux_is_the_operator(nf in nfunction(), p in tensor()) {
        let a = op_a(&nf, &p);
        prop_assert!((op_a_shifted(&nf, 0.0, &p) - a).norm() <= 1e-14 * a.norm().max(1e-300));
    }

    #[test]
    fn jacobian_is_symmetric(nf in nfunction(), p in tensor()) {
        let j = op_a_jacobian(&nf, &p, 0.0).unwrap();
        prop_assert!(j.asymmetry() <= 1e-12 * j.max_abs());
    }

    #[test]
    fn natural_distance_is_equivalent_to_the_monotonicity_gap(p_exp in 1.5..3.0f64, p in tensor(), q in tensor()) {
        let nf = NFunction::new(p_exp, 1e-3).unwrap();
        let gap = (op_a(&nf, &p) - op_a(&nf, &q)).dot(&(p - q));
        let dist = (map_f(&nf, &p) - map_f(&nf, &q)).norm().powi(2);
        prop_assume!(dist > 1e-200);
        let ratio = gap / dist;
        prop_assert!((0.1..=10.0).contains(&ratio), "ratio {}", ratio);
    }
}
