//! Checks against values computed by independent routes: exact rational
//! arithmetic, brute-force enumeration, simulation.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lacunary_core::decimal;
use lacunary_core::experiments::{fit_variance_slope, variance_table, AlphaLaw, ExperimentConfig};
use lacunary_core::sequences::{fractional_parts, interval_count, materialize, Dilation, LacunarySpec, PrecisionBudget, TorusSample};
use lacunary_core::statistics::{correlation_direct, correlation_naive, correlation_poisson_k2, gap_profile};
use lacunary_core::testfn::TestFunction;
use lacunary_core::Error;

fn three_halves() -> LacunarySpec {
    LacunarySpec::geometric_decimal("1.5", "1").unwrap()
}

#[test]
fn power_of_three_halves_is_exact() {
    let seq = materialize(&three_halves(), 20, PrecisionBudget::default()).unwrap();
    let v = seq.value(20);
    let f = v.frac_bits();
    // 1.5^20 = 3^20 / 2^20 is dyadic, so the ball is a point.
    let three20 = BigUint::from(3u32).pow(20);
    assert_eq!(*v.mid(), &three20 << (f - 20));
    assert_eq!(*v.rad(), BigUint::from(0u32));

    let s = fractional_parts(&three_halves(), &Dilation::parse("1").unwrap(), 20, PrecisionBudget::default()).unwrap();
    let expected = (&three20 % (BigUint::one() << 20u32)).to_u64().unwrap() as f64 / (1u64 << 20) as f64;
    assert_eq!(s.points_f64()[19], expected);
}

#[test]
fn interval_count_matches_rational_enumeration() {
    let spec = three_halves();
    let seq = materialize(&spec, 30, PrecisionBudget::default()).unwrap();
    let lo = BigRational::from_integer(BigInt::from(1));
    let hi = BigRational::from_integer(BigInt::from(100));
    let c = BigRational::new(BigInt::from(3), BigInt::from(2));
    let mut power = c.clone();
    let mut expected = 0;
    for _ in 0..30 {
        if power >= lo && power <= hi {
            expected += 1;
        }
        power = &power * &c;
    }
    let got = interval_count(&seq, &lo, &hi).unwrap();
    assert_eq!(got.count, expected);
    assert_eq!(expected, 11);
    assert!(got.bound_holds);
    assert_eq!(got.constant, BigRational::from_integer(BigInt::from(2)));
}

#[test]
fn interval_count_small_cases() {
    let spec = LacunarySpec::geometric_decimal("2", "1").unwrap();
    let seq = materialize(&spec, 10, PrecisionBudget::default()).unwrap();
    let r = |x: i64| BigRational::from_integer(BigInt::from(x));
    let c = interval_count(&seq, &r(3), &r(9)).unwrap();
    assert_eq!((c.count, c.bound_holds), (2, true));
    assert_eq!(c.constant, r(1));
    let c = interval_count(&seq, &r(2), &r(2)).unwrap();
    assert_eq!((c.count, c.bound_holds), (1, true));
}

#[test]
fn uniform_points_have_exponential_gaps() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pts: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
    let g = gap_profile(&TorusSample::from_f64_points(&pts).unwrap()).unwrap();
    assert!(g.ks_distance < 0.05, "ks {}", g.ks_distance);
}

#[test]
fn dual_sum_agrees_with_direct_at_n_1000() {
    let s = fractional_parts(&three_halves(), &Dilation::parse("1.2345").unwrap(), 1000, PrecisionBudget::default()).unwrap();
    let tf = TestFunction::triangle(1, 1.0).unwrap();
    let d = correlation_direct(&s, 2, &tf).unwrap().value;
    let p = correlation_poisson_k2(&s, &tf, 50_000).unwrap();
    assert!((p.value - d).abs() < 1e-3, "direct {d} poisson {}", p.value);
    assert!((p.value - d).abs() <= p.method.tail_bound() + 1e-6);
}

#[test]
fn direct_matches_naive_for_triples() {
    let s = fractional_parts(&three_halves(), &Dilation::parse("1.37").unwrap(), 300, PrecisionBudget::default()).unwrap();
    let tf = TestFunction::triangle(2, 1.0).unwrap();
    let d = correlation_direct(&s, 3, &tf).unwrap().value;
    let n = correlation_naive(&s, 3, &tf).unwrap().value;
    assert!(d > 0.0);
    assert!((d - n).abs() <= 1e-9 * n.abs(), "direct {d} naive {n}");
}

#[test]
fn wide_support_on_two_points() {
    let s = TorusSample::from_f64_points(&[0.0, 0.5]).unwrap();
    let tf = TestFunction::symmetric_box(1, 1.2).unwrap();
    assert_eq!(correlation_naive(&s, 2, &tf).unwrap().value, 2.0);
    assert!(matches!(correlation_direct(&s, 2, &tf), Err(Error::SupportTooWide { .. })));
}

#[test]
fn box_correlations_agree_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let pts: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let s = TorusSample::from_f64_points(&pts).unwrap();
        let tf = TestFunction::boxed(vec![(-0.7, 1.9)]).unwrap();
        let d = correlation_direct(&s, 2, &tf).unwrap().value;
        assert!(d >= 0.0);
        assert_eq!(d, correlation_naive(&s, 2, &tf).unwrap().value);
    }
}

#[test]
fn bump_transform_at_zero_is_its_integral() {
    let tf = TestFunction::bump(1, 1.0).unwrap();
    assert!((tf.fourier(&[0.0]).re - tf.integral()).abs() < 1e-10);
}

#[test]
fn variance_slopes_are_seed_independent() {
    let mut slopes = Vec::new();
    for seed in [1u64, 2] {
        let mut cfg = ExperimentConfig::new(three_halves(), vec![128, 256, 512, 1024], 60, seed);
        cfg.alpha_law = AlphaLaw::Uniform { lo: 1.0, hi: 2.0 };
        let rows = variance_table(&cfg).unwrap();
        slopes.push(fit_variance_slope(&rows, 2).unwrap());
    }
    let combined = (slopes[0].standard_error.powi(2) + slopes[1].standard_error.powi(2)).sqrt();
    assert!((slopes[0].slope - slopes[1].slope).abs() <= 3.0 * combined, "{slopes:?}");
}

#[test]
fn digit_string_bases_certify_only_what_is_given() {
    let e = "2.718281828459045235360287471352662497757";
    let spec = LacunarySpec::geometric(lacunary_core::sequences::BaseValue::digits(e).unwrap(), decimal::rational("1").unwrap()).unwrap();
    assert!(materialize(&spec, 10, PrecisionBudget::default()).is_ok());
    assert!(matches!(
        materialize(&spec, 2000, PrecisionBudget::default()),
        Err(Error::InsufficientDigits { .. })
    ));
}
