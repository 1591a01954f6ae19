//! Scaled fixed-point balls over big unsigned integers.
//!
//! A [`Ball`] encloses a nonnegative real `x` as
//! `(mid - rad) / 2^F <= x <= (mid + rad) / 2^F` where `F` is the number of
//! fractional bits. Every operation widens the radius by at most the rounding
//! it performs, so the enclosure is rigorous. Taking the fractional part is a
//! bit mask on `mid`, which is why values are kept with their full integer
//! part instead of being reduced modulo one.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ball {
    mid: BigUint,
    rad: BigUint,
    frac_bits: u32,
}

/// Returns `Some(k)` when `x == 2^k`.
pub(crate) fn power_of_two_exponent(x: &BigUint) -> Option<u64> {
    let tz = x.trailing_zeros()?;
    if x.bits() == tz + 1 {
        Some(tz)
    } else {
        None
    }
}

/// `floor(num / den)` together with a flag telling whether the division was exact.
fn div_floor_exact(num: &BigUint, den: &BigUint) -> (BigUint, bool) {
    if let Some(k) = power_of_two_exponent(den) {
        let q = num >> k;
        let exact = match num.trailing_zeros() {
            Some(tz) => tz >= k,
            None => true,
        };
        (q, exact)
    } else {
        let (q, r) = num.div_rem(den);
        (q, r.is_zero())
    }
}

fn div_ceil(num: &BigUint, den: &BigUint) -> BigUint {
    let (q, exact) = div_floor_exact(num, den);
    if exact {
        q
    } else {
        q + 1u32
    }
}

fn shr_ceil(x: &BigUint, k: u32) -> BigUint {
    let q = x >> k;
    if (&q << k) == *x {
        q
    } else {
        q + 1u32
    }
}

impl Ball {
    pub fn exact(mid: BigUint, frac_bits: u32) -> Self {
        Ball {
            mid,
            rad: BigUint::zero(),
            frac_bits,
        }
    }

    pub fn new(mid: BigUint, rad: BigUint, frac_bits: u32) -> Self {
        Ball {
            mid,
            rad,
            frac_bits,
        }
    }

    pub fn from_integer(v: &BigUint, frac_bits: u32) -> Self {
        Ball::exact(v << frac_bits, frac_bits)
    }

    /// Encloses the nonnegative rational `num / den`.
    pub fn from_ratio(num: &BigUint, den: &BigUint, frac_bits: u32) -> Self {
        let (mid, exact) = div_floor_exact(&(num << frac_bits), den);
        let rad = if exact { BigUint::zero() } else { BigUint::one() };
        Ball {
            mid,
            rad,
            frac_bits,
        }
    }

    /// Encloses a nonnegative [`BigRational`]. Panics on negative input.
    pub fn from_rational(r: &BigRational, frac_bits: u32) -> Self {
        assert!(!r.is_negative(), "balls hold nonnegative values");
        let num = r.numer().magnitude().clone();
        let den = r.denom().magnitude().clone();
        Ball::from_ratio(&num, &den, frac_bits)
    }

    pub fn mid(&self) -> &BigUint {
        &self.mid
    }

    pub fn rad(&self) -> &BigUint {
        &self.rad
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn is_exact(&self) -> bool {
        self.rad.is_zero()
    }

    /// Significant bits carried by the midpoint.
    pub fn bits(&self) -> u64 {
        self.mid.bits()
    }

    pub fn lower(&self) -> BigUint {
        if self.rad > self.mid {
            BigUint::zero()
        } else {
            &self.mid - &self.rad
        }
    }

    pub fn upper(&self) -> BigUint {
        &self.mid + &self.rad
    }

    /// Multiplies by the positive rational `p / q`.
    pub fn mul_ratio(&self, p: &BigUint, q: &BigUint) -> Ball {
        let (mid, exact) = div_floor_exact(&(&self.mid * p), q);
        let mut rad = if self.rad.is_zero() {
            BigUint::zero()
        } else {
            div_ceil(&(&self.rad * p), q)
        };
        if !exact {
            rad += 1u32;
        }
        Ball {
            mid,
            rad,
            frac_bits: self.frac_bits,
        }
    }

    pub fn mul_rational(&self, r: &BigRational) -> Ball {
        assert!(r.is_positive(), "multiplier must be positive");
        self.mul_ratio(r.numer().magnitude(), r.denom().magnitude())
    }

    /// Product of two balls with the same fractional precision.
    pub fn mul(&self, other: &Ball) -> Ball {
        assert_eq!(self.frac_bits, other.frac_bits);
        let f = self.frac_bits;
        let prod = &self.mid * &other.mid;
        let mid = &prod >> f;
        let exact = (&mid << f) == prod;
        let spread = &self.mid * &other.rad + &other.mid * &self.rad + &self.rad * &other.rad;
        let mut rad = if spread.is_zero() {
            BigUint::zero()
        } else {
            shr_ceil(&spread, f)
        };
        if !exact {
            rad += 1u32;
        }
        Ball {
            mid,
            rad,
            frac_bits: f,
        }
    }

    /// `self^n` by binary exponentiation at the current precision.
    pub fn pow(&self, mut n: u64) -> Ball {
        let mut acc = Ball::from_integer(&BigUint::one(), self.frac_bits);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Re-expresses the ball with `frac_bits` fractional bits.
    pub fn with_frac_bits(&self, frac_bits: u32) -> Ball {
        match frac_bits.cmp(&self.frac_bits) {
            Ordering::Equal => self.clone(),
            Ordering::Greater => {
                let s = frac_bits - self.frac_bits;
                Ball {
                    mid: &self.mid << s,
                    rad: &self.rad << s,
                    frac_bits,
                }
            }
            Ordering::Less => {
                let s = self.frac_bits - frac_bits;
                let mid = &self.mid >> s;
                let exact = (&mid << s) == self.mid;
                let mut rad = shr_ceil(&self.rad, s);
                if !exact {
                    rad += 1u32;
                }
                Ball {
                    mid,
                    rad,
                    frac_bits,
                }
            }
        }
    }

    /// log2 of the radius measured in units of 1 (not ulps); `-inf` when exact.
    pub fn radius_log2(&self) -> f64 {
        if self.rad.is_zero() {
            f64::NEG_INFINITY
        } else {
            biguint_log2(&self.rad) - self.frac_bits as f64
        }
    }

    /// log2 of the midpoint value.
    pub fn value_log2(&self) -> f64 {
        if self.mid.is_zero() {
            f64::NEG_INFINITY
        } else {
            biguint_log2(&self.mid) - self.frac_bits as f64
        }
    }

    /// Fractional part as a 128-bit fixed-point fraction (`value / 2^128`).
    ///
    /// Returns `None` when the enclosure straddles an integer, i.e. the floor
    /// is not decided. The second component is the radius in units of 2^-128,
    /// rounded up.
    pub fn frac_u128(&self) -> Option<(u128, BigUint)> {
        let f = self.frac_bits;
        if (self.lower() >> f) != (self.upper() >> f) {
            return None;
        }
        let mask = (BigUint::one() << f) - 1u32;
        let frac = &self.mid & &mask;
        let (point, rad) = if f >= 128 {
            let s = f - 128;
            let p = &frac >> s;
            let mut rad = shr_ceil(&self.rad, s);
            if (&p << s) != frac {
                rad += 1u32;
            }
            (p, rad)
        } else {
            let s = 128 - f;
            (&frac << s, &self.rad << s)
        };
        Some((point.to_u128().expect("fraction fits 128 bits"), rad))
    }

    /// Compares the enclosed value with a nonnegative rational. `None` when the
    /// enclosure contains `r` and the value is not exactly `r`.
    pub fn cmp_rational(&self, r: &BigRational) -> Option<Ordering> {
        assert!(!r.is_negative());
        let num = r.numer().magnitude() << self.frac_bits;
        let den = r.denom().magnitude();
        let lo = self.lower() * den;
        let hi = self.upper() * den;
        if lo > num {
            Some(Ordering::Greater)
        } else if hi < num {
            Some(Ordering::Less)
        } else if lo == num && hi == num {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// Outward-rounded `f64` enclosure `[lo, hi]`.
    pub fn to_f64_bounds(&self) -> (f64, f64) {
        (
            biguint_scaled_f64(&self.lower(), self.frac_bits, false),
            biguint_scaled_f64(&self.upper(), self.frac_bits, true),
        )
    }

    /// Nearest `f64` to the midpoint (not a bound).
    pub fn to_f64(&self) -> f64 {
        let (lo, hi) = self.to_f64_bounds();
        0.5 * lo + 0.5 * hi
    }
}

pub(crate) fn biguint_log2(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_u64().unwrap() as f64;
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap() as f64;
    top.log2() + shift as f64
}

/// `x / 2^f` rounded down (or up) to an `f64`.
pub(crate) fn biguint_scaled_f64(x: &BigUint, f: u32, round_up: bool) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let bits = x.bits();
    let (top, shift, dropped) = if bits > 64 {
        let s = bits - 64;
        let top = x >> s;
        let dropped = (&top << s) != *x;
        (top.to_u64().unwrap(), s as i64, dropped)
    } else {
        (x.to_u64().unwrap(), 0, false)
    };
    let approx = top as f64;
    let significant = 64 - top.leading_zeros() - top.trailing_zeros();
    let exact = !dropped && significant <= 53;
    let mantissa = if exact {
        approx
    } else if round_up {
        approx.next_up()
    } else {
        approx.next_down()
    };
    let exp = shift - f as i64;
    scale_pow2(mantissa, exp)
}

/// `m * 2^e` with exact power-of-two scaling, saturating to 0 or inf.
pub(crate) fn scale_pow2(m: f64, e: i64) -> f64 {
    let mut v = m;
    let mut e = e;
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    v * 2f64.powi(e as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn dyadic_ratio_is_exact() {
        let b = Ball::from_rational(&rat(3, 2), 10);
        assert!(b.is_exact());
        assert_eq!(b.mid(), &BigUint::from(1536u32));
    }

    #[test]
    fn non_dyadic_ratio_has_unit_radius() {
        let b = Ball::from_rational(&rat(1, 3), 8);
        assert_eq!(b.rad(), &BigUint::one());
        assert_eq!(b.cmp_rational(&rat(1, 3)), None);
        assert_eq!(b.cmp_rational(&rat(1, 2)), Some(Ordering::Less));
    }

    #[test]
    fn frac_of_exact_integer_is_zero() {
        let b = Ball::from_integer(&BigUint::from(7u32), 70);
        let (p, r) = b.frac_u128().unwrap();
        assert_eq!(p, 0);
        assert!(r.is_zero());
    }

    #[test]
    fn frac_straddling_integer_is_undecided() {
        // 1 - 2^-10 with radius 2 ulps straddles 1.
        let b = Ball::new(BigUint::from(1023u32), BigUint::from(2u32), 10);
        assert!(b.frac_u128().is_none());
    }

    #[test]
    fn pow_matches_exact_integer_power() {
        let three_halves = Ball::from_rational(&rat(3, 2), 64);
        let p = three_halves.pow(20);
        let exact = Ball::from_ratio(&BigUint::from(3u32).pow(20), &BigUint::from(2u32).pow(20), 64);
        assert_eq!(p, exact);
    }

    #[test]
    fn f64_bounds_enclose() {
        let b = Ball::from_rational(&rat(1, 10), 200);
        let (lo, hi) = b.to_f64_bounds();
        assert!(lo <= 0.1 && 0.1 <= hi);
        assert!(hi - lo < 1e-16);
        let e = Ball::from_integer(&BigUint::from(1u64 << 40), 300);
        assert_eq!(e.to_f64_bounds(), ((1u64 << 40) as f64, (1u64 << 40) as f64));
    }

    #[test]
    fn mul_encloses_product() {
        let a = Ball::from_rational(&rat(1, 3), 100);
        let b = Ball::from_rational(&rat(7, 5), 100);
        let p = a.mul(&b);
        assert_eq!(p.cmp_rational(&rat(7, 15)), None);
        assert_eq!(p.cmp_rational(&rat(7, 14)), Some(Ordering::Less));
    }
}
