use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use lacunary_core::counting::{count_quadruples, count_region, QuadrupleInstance, RegionInstance};
use lacunary_core::decimal;
use lacunary_core::sequences::{interval_count, materialize, LacunarySpec, PrecisionBudget, TorusSample};
use lacunary_core::statistics::{c_k_factor, correlation_direct, gap_profile};
use lacunary_core::testfn::{FamilyKind, TestFunction};

fn family() -> impl Strategy<Value = FamilyKind> {
    prop_oneof![Just(FamilyKind::Box), Just(FamilyKind::Triangle), Just(FamilyKind::SmoothBump)]
}

fn points(max: usize) -> impl Strategy<Value = Vec<u128>> {
    prop::collection::vec(any::<u128>(), 8..max)
}

/// Ratio c = p/q in (1.05, 3] and the matching geometric spec.
fn ratio() -> impl Strategy<Value = (i64, i64)> {
    (21i64..=60).prop_map(|p| (p, 20))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn test_functions_vanish_off_support(kind in family(), dim in 1usize..=3, l in 0.2f64..3.0,
                                         x in prop::collection::vec(-10.0f64..10.0, 3)) {
        let tf = TestFunction::from_kind(kind, dim, l).unwrap();
        let x = &x[..dim];
        if x.iter().any(|v| v.abs() > l) {
            prop_assert_eq!(tf.evaluate(x), 0.0);
        }
        prop_assert!(tf.integral() > 0.0);
    }

    #[test]
    fn triangle_transform_is_nonnegative_and_peaks_at_zero(l in 0.2f64..3.0, xi in -20.0f64..20.0) {
        let tf = TestFunction::triangle(1, l).unwrap();
        let v = tf.fourier(&[xi]).re;
        let peak = tf.fourier(&[0.0]).re;
        prop_assert!(v >= 0.0);
        prop_assert!(v <= peak * (1.0 + 1e-15));
        prop_assert!((peak - tf.integral()).abs() < 1e-12);
    }

    #[test]
    fn rotation_leaves_statistics_unchanged(pts in points(200), shift in any::<u128>(), k in 2usize..=3) {
        let a = TorusSample::from_fractions(pts.clone(), 128);
        let b = TorusSample::from_fractions(pts.iter().map(|p| p.wrapping_add(shift)).collect(), 128);
        let tf = TestFunction::triangle(k - 1, 1.0).unwrap();
        let ra = correlation_direct(&a, k, &tf).unwrap().value;
        let rb = correlation_direct(&b, k, &tf).unwrap().value;
        prop_assert!((ra - rb).abs() <= 1e-12 * ra.abs().max(1.0));
        let ga = gap_profile(&a).unwrap();
        let gb = gap_profile(&b).unwrap();
        let mut sa = ga.gaps.clone();
        let mut sb = gb.gaps.clone();
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        for (x, y) in sa.iter().zip(&sb) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn doubling_f_doubles_r(pts in points(150), k in 2usize..=3, l in 0.3f64..2.0) {
        let s = TorusSample::from_fractions(pts, 128);
        let tf = TestFunction::triangle(k - 1, l).unwrap();
        let one = correlation_direct(&s, k, &tf).unwrap().value;
        let two = correlation_direct(&s, k, &tf.clone().scaled(2.0)).unwrap().value;
        prop_assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn gaps_sum_to_n(pts in points(400)) {
        let n = pts.len() as f64;
        let g = gap_profile(&TorusSample::from_fractions(pts, 128)).unwrap();
        prop_assert!(g.gaps.iter().all(|&d| d >= 0.0));
        prop_assert!((g.gap_sum() - n).abs() <= 1e-9 * n);
        prop_assert!((0.0..=1.0).contains(&g.ks_distance));
    }

    #[test]
    fn region_counts_grow_with_c_and_m(a1 in 2.0f64..9.0, a2 in 0.1f64..1.9, b in -3.0f64..3.0,
                                      c in 1.0f64..4.0, m in 1i64..20) {
        let count = |c: f64, m: i64| count_region(&RegionInstance::new(&[a1, a2], b, c, m).unwrap()).unwrap().count;
        let base = count(c, m);
        prop_assert!(count(c + 0.5, m) >= base);
        prop_assert!(count(c, m + 1) >= base);
    }

    #[test]
    fn interval_bound_holds((p, q) in ratio(), lo in 0.5f64..200.0, width in 0.0f64..100.0) {
        let c = BigRational::new(BigInt::from(p), BigInt::from(q));
        let spec = LacunarySpec::geometric(lacunary_core::sequences::BaseValue::Exact(c), decimal::rational("1").unwrap()).unwrap();
        let seq = materialize(&spec, 60, PrecisionBudget::default()).unwrap();
        let lo_r = decimal::rational_from_f64(lo).unwrap();
        let hi_r = decimal::rational_from_f64(lo + width).unwrap();
        prop_assert!(interval_count(&seq, &lo_r, &hi_r).unwrap().bound_holds);
    }

    #[test]
    fn consecutive_gaps_respect_the_lacunary_floor((p, q) in ratio(), scale in 1u32..50) {
        let c = BigRational::new(BigInt::from(p), BigInt::from(q));
        let a = BigRational::new(BigInt::from(scale), BigInt::from(7));
        let spec = LacunarySpec::geometric(lacunary_core::sequences::BaseValue::Exact(c.clone()), a).unwrap();
        let a1 = spec.exact_rational(1, 1 << 20).unwrap();
        let floor = &a1 * (BigRational::from_integer(1.into()) - c.recip());
        for n in 1..40 {
            let gap = spec.exact_rational(n + 1, 1 << 20).unwrap() - spec.exact_rational(n, 1 << 20).unwrap();
            prop_assert!(gap >= floor);
        }
    }

    #[test]
    fn working_bits_are_monotone((p, q) in ratio(), n in 1usize..5000) {
        let c = BigRational::new(BigInt::from(p), BigInt::from(q));
        let spec = LacunarySpec::geometric(lacunary_core::sequences::BaseValue::Exact(c), decimal::rational("1").unwrap()).unwrap();
        let b = PrecisionBudget::default().with_alpha_upper(2.0);
        prop_assert!(b.working_bits(&spec, n + 1) >= b.working_bits(&spec, n));
        prop_assert!(b.working_bits(&spec, n) >= 64 + spec.log2_magnitude_upper(n) as u64 + 1);
    }

    #[test]
    fn c_k_increases_to_one(k in 2usize..=4, n in 4usize..10_000) {
        let a = c_k_factor(k, n).unwrap();
        let b = c_k_factor(k, n + 1).unwrap();
        prop_assert!(a < b && b < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn quadruple_counts_grow_with_epsilon(n in 2usize..8, eps in 0.01f64..0.3) {
        let spec = LacunarySpec::geometric_decimal("2", "1").unwrap();
        let small = count_quadruples(&QuadrupleInstance::new(2, n, eps, &spec).unwrap()).unwrap();
        let large = count_quadruples(&QuadrupleInstance::new(2, n, eps + 0.1, &spec).unwrap()).unwrap();
        prop_assert!(large.count >= small.count);
        prop_assert_eq!(small.pairing_violations.unwrap_or(0), 0);
    }
}
