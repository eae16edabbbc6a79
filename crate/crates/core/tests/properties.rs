use iet3::cf::ContinuedFraction;
use iet3::circle::{
    count_in_union, count_in_union_direct, floor_sum, psi_partition, psi_value, Interval, IntervalUnion,
};
use iet3::field::FieldElement as Fe;
use iet3::iet::{rotation_to_lengths, lengths_to_rotation, IetSystem};
use iet3::mobius::{mobius_sieve, mobius_trial};
use num_bigint::BigInt;
use proptest::prelude::*;

fn golden() -> ContinuedFraction {
    ContinuedFraction::golden(60)
}

fn unit_rational() -> impl Strategy<Value = Fe> {
    (2i64..5000).prop_flat_map(|q| (0..q, Just(q))).prop_map(|(p, q)| Fe::rational(p, q))
}

fn sqrt5_element() -> impl Strategy<Value = Fe> {
    (-50i64..50, -50i64..50, 1i64..40).prop_map(|(a, b, c)| Fe::from_i64s(a, b, c, 5).unwrap())
}

fn union() -> impl Strategy<Value = IntervalUnion> {
    prop::collection::vec((unit_rational(), unit_rational()), 0..4).prop_map(|v| {
        let pieces = v.into_iter().filter(|(a, b)| a < b).collect();
        IntervalUnion::from_pieces(pieces)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_strings_round_trip(x in sqrt5_element()) {
        let back: Fe = x.exact_string().parse().unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn field_ring_laws(x in sqrt5_element(), y in sqrt5_element(), z in sqrt5_element()) {
        prop_assert_eq!(&(&x + &y) * &z, &(&x * &z) + &(&y * &z));
        prop_assert_eq!(&(&x - &y) + &y, x.clone());
        if !y.is_zero() {
            prop_assert_eq!(&(&x / &y) * &y, x.clone());
        }
        let f = x.floor();
        prop_assert!(Fe::integer(f.clone()) <= x && x < Fe::integer(f + 1));
    }

    #[test]
    fn order_agrees_with_floats(x in sqrt5_element(), y in sqrt5_element()) {
        let (a, b) = (x.to_f64(), y.to_f64());
        if (a - b).abs() > 1e-9 {
            prop_assert_eq!(x < y, a < b);
        }
    }

    #[test]
    fn ostrowski_round_trip(x in unit_rational()) {
        let cf = ContinuedFraction::periodic(&[], &[3, 1], 50).unwrap();
        let code = cf.ostrowski_encode(&x, 30).unwrap();
        cf.is_admissible(&code).unwrap();
        let back = cf.ostrowski_decode(&code).unwrap();
        prop_assert!((&back - &x).abs() <= cf.beta(30));
    }

    #[test]
    fn measure_is_additive(a in union(), b in union()) {
        let lhs = a.union(&b).measure() + a.intersection(&b).measure();
        prop_assert_eq!(lhs, a.measure() + b.measure());
        prop_assert_eq!(a.complement().measure(), Fe::one() - a.measure());
        prop_assert!(a.intersection(&b).is_subset(&a));
        prop_assert_eq!(a.difference(&b).union(&a.intersection(&b)), a.clone());
    }

    #[test]
    fn rotation_preserves_measure(a in union(), n in -200i64..200) {
        let cf = golden();
        let r = a.rotate(n, &cf);
        prop_assert_eq!(r.measure(), a.measure());
        prop_assert_eq!(r.rotate(-n, &cf), a);
    }

    #[test]
    fn floor_sum_matches_loop(n in 0u64..300, b in unit_rational()) {
        let alpha = golden().alpha().clone();
        let mut direct = BigInt::from(0);
        for k in 0..n {
            direct += (alpha.mul_int(&BigInt::from(k)) + b.clone()).floor();
        }
        prop_assert_eq!(floor_sum(n, &alpha, &b), direct);
    }

    #[test]
    fn counts_match_iteration(x in unit_rational(), u in union(), n in 0u64..400) {
        let alpha = golden().alpha().clone();
        prop_assert_eq!(count_in_union(&x, &alpha, &u, n), count_in_union_direct(&x, &alpha, &u, n));
    }

    #[test]
    fn psi_partition_agrees_pointwise(l in 1u64..120, x in unit_rational()) {
        let cf = golden();
        let j = Interval::initial(&Fe::rational(7, 10)).unwrap();
        let psi = psi_partition(l, &j, &cf).unwrap();
        prop_assert_eq!(psi.value_at(&x), psi_value(&x, l, &j, &cf) as i64);
        prop_assert_eq!(psi.integral(), Fe::rational(7 * l as i64, 10));
    }

    #[test]
    fn iet_steps_invert(x in unit_rational(), k in -3000i64..3000) {
        let sys = IetSystem::new(golden(), Fe::rational(7, 10)).unwrap();
        let x = &x * &Fe::rational(7, 10);
        prop_assert_eq!(sys.step_back(&sys.step(&x)), x.clone());
        let y = sys.apply(&x, k).unwrap();
        prop_assert!(sys.in_j(&y));
        prop_assert_eq!(sys.apply(&y, -k).unwrap(), x);
    }

    #[test]
    fn induced_identity(x in unit_rational(), m in 1u64..5000) {
        let sys = IetSystem::new(golden(), Fe::rational(7, 10)).unwrap();
        prop_assert_ne!(sys.induced_identity_check(&x, m), Some(false));
    }

    #[test]
    fn lengths_round_trip(z in (1i64..1000).prop_map(|n| Fe::rational(n, 1000))) {
        let alpha = golden().alpha().clone();
        let one_minus = Fe::one() - alpha.clone();
        prop_assume!(z >= alpha.clone().max(one_minus));
        let l = rotation_to_lengths(&alpha, &z).unwrap();
        let (a, zz) = lengths_to_rotation(&l).unwrap();
        prop_assert_eq!(a, alpha);
        prop_assert_eq!(zz, z);
    }

    #[test]
    fn fast_orbit_tracks_exact(x in unit_rational()) {
        let sys = IetSystem::new(golden(), Fe::rational(7, 10)).unwrap();
        let x = &x * &Fe::rational(7, 10);
        let fast = sys.fast_orbit(&x, 500);
        let mut y = x;
        for f in fast {
            y = sys.step(&y);
            prop_assert!((y.to_f64() - f).abs() < 1e-12);
        }
    }
}

#[test]
fn sieve_matches_trial_division() {
    let t = mobius_sieve(20_000).unwrap();
    for n in 1..=20_000usize {
        assert_eq!(t.mu(n), mobius_trial(n as u64), "n = {n}");
    }
}
