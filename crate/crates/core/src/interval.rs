//! Outward-rounded `f64` intervals.
//!
//! Rounding direction is recovered from error-free transformations (TwoSum
//! and FMA-based TwoProduct): a bound is moved by one ulp only when the
//! floating-point result was actually inexact, so exact arithmetic on
//! representable values stays a point interval and ties on a boundary can be
//! decided.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Three-valued outcome of an interval comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    True,
    False,
    Ambiguous,
}

fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    let e = a.mul_add(b, -p);
    // Below the normal range the FMA residual is not exact; widen blindly.
    if p != 0.0 && p.abs() < f64::MIN_POSITIVE * 4.0 {
        return p.next_down();
    }
    if e < 0.0 {
        p.next_down()
    } else {
        p
    }
}

fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    let e = a.mul_add(b, -p);
    if p != 0.0 && p.abs() < f64::MIN_POSITIVE * 4.0 {
        return p.next_up();
    }
    if e > 0.0 {
        p.next_up()
    } else {
        p
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn zero() -> Self {
        Interval::point(0.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Magnitude `max |x|` over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Mignitude `min |x|` over the interval.
    pub fn mig(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn abs(&self) -> Interval {
        Interval::new(self.mig(), self.mag())
    }

    pub fn scale_int(&self, k: i64) -> Interval {
        *self * Interval::point(k as f64)
    }

    /// Decides `|self| <= bound` where `bound` is itself an enclosure.
    pub fn abs_le(&self, bound: &Interval) -> Decision {
        if self.mag() <= bound.lo {
            Decision::True
        } else if self.mig() > bound.hi {
            Decision::False
        } else {
            Decision::Ambiguous
        }
    }

    /// Decides `self <= other`.
    pub fn le(&self, other: &Interval) -> Decision {
        if self.hi <= other.lo {
            Decision::True
        } else if self.lo > other.hi {
            Decision::False
        } else {
            Decision::Ambiguous
        }
    }

    /// Outward-rounded quotient; `None` if the divisor contains zero.
    pub fn div(&self, other: &Interval) -> Option<Interval> {
        if other.contains_zero() {
            return None;
        }
        let cands = [
            (self.lo, other.lo),
            (self.lo, other.hi),
            (self.hi, other.lo),
            (self.hi, other.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in cands {
            let q = a / b;
            // Correctly rounded quotient: residual a - q*b tells the direction.
            let r = (-q).mul_add(b, a);
            let (d, u) = if r == 0.0 {
                (q, q)
            } else if (r > 0.0) == (b > 0.0) {
                (q, q.next_up())
            } else {
                (q.next_down(), q)
            };
            lo = lo.min(d);
            hi = hi.max(u);
        }
        Some(Interval::new(lo, hi))
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval::new(add_down(self.lo, o.lo), add_up(self.hi, o.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        self + (-o)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let pairs = [
            (self.lo, o.lo),
            (self.lo, o.hi),
            (self.hi, o.lo),
            (self.hi, o.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in pairs {
            lo = lo.min(mul_down(a, b));
            hi = hi.max(mul_up(a, b));
        }
        Interval::new(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_operations_stay_points() {
        let a = Interval::point(2.0);
        let b = Interval::point(3.0);
        assert_eq!(a + b, Interval::point(5.0));
        assert_eq!(a * b, Interval::point(6.0));
        assert_eq!(Interval::point(2.0).abs_le(&Interval::point(2.0)), Decision::True);
    }

    #[test]
    fn inexact_sum_is_widened() {
        let s = Interval::point(0.1) + Interval::point(0.2);
        assert!(s.lo < s.hi);
        assert!(s.contains(0.30000000000000004) || s.contains(0.3));
    }

    #[test]
    fn division_by_interval_with_zero_is_refused() {
        assert!(Interval::point(1.0).div(&Interval::new(-1.0, 1.0)).is_none());
        let q = Interval::point(1.0).div(&Interval::point(3.0)).unwrap();
        assert!(q.lo < q.hi && q.hi - q.lo <= 2.0 * f64::EPSILON);
    }

    proptest! {
        // Exact rational check: integers scaled by a power of two are
        // representable, so the enclosure must contain the exact product.
        #[test]
        fn product_encloses_exact_value(a in -1_000_000i64..1_000_000, b in -1_000_000i64..1_000_000, s in 0i32..40) {
            let x = a as f64 / 2f64.powi(s);
            let y = b as f64 / 3.0;
            let p = Interval::point(x) * Interval::point(y);
            // x*y = a*b/(3*2^s): compare via cross multiplication in i128.
            let num = a as i128 * b as i128;
            let scale = 3i128 << s;
            let lo_ok = (p.lo * scale as f64) <= num as f64 + 1e-6 * (num.abs() as f64 + 1.0);
            let hi_ok = (p.hi * scale as f64) >= num as f64 - 1e-6 * (num.abs() as f64 + 1.0);
            prop_assert!(lo_ok && hi_ok);
            prop_assert!(p.lo <= p.hi);
        }

        #[test]
        fn sum_brackets_rounded_sum(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let s = Interval::point(a) + Interval::point(b);
            prop_assert!(s.lo <= a + b && a + b <= s.hi);
            prop_assert!(s.hi - s.lo <= 2.0 * (a + b).abs() * f64::EPSILON + f64::MIN_POSITIVE);
        }
    }
}
