//! Irrational bases computed to any requested precision.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::fixed::Ball;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedConstant {
    Sqrt2,
    E,
    Pi,
    Phi,
}

impl NamedConstant {
    /// Enclosure with `frac_bits` fractional bits and a radius of a few ulps.
    pub fn ball(self, frac_bits: u32) -> Ball {
        match self {
            NamedConstant::Sqrt2 => {
                let s = (BigUint::from(2u32) << (2 * frac_bits)).sqrt();
                Ball::new(s, BigUint::one(), frac_bits)
            }
            NamedConstant::Phi => {
                let s = (BigUint::from(5u32) << (2 * frac_bits)).sqrt();
                let mid = ((BigUint::one() << frac_bits) + s) >> 1;
                Ball::new(mid, BigUint::one(), frac_bits)
            }
            NamedConstant::E => euler(frac_bits),
            NamedConstant::Pi => pi(frac_bits),
        }
    }

    pub fn approx(self) -> f64 {
        match self {
            NamedConstant::Sqrt2 => std::f64::consts::SQRT_2,
            NamedConstant::E => std::f64::consts::E,
            NamedConstant::Pi => std::f64::consts::PI,
            NamedConstant::Phi => 1.618_033_988_749_895,
        }
    }
}

impl fmt::Display for NamedConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NamedConstant::Sqrt2 => "sqrt2",
            NamedConstant::E => "e",
            NamedConstant::Pi => "pi",
            NamedConstant::Phi => "phi",
        };
        f.write_str(s)
    }
}

impl FromStr for NamedConstant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sqrt2" => Ok(NamedConstant::Sqrt2),
            "e" => Ok(NamedConstant::E),
            "pi" => Ok(NamedConstant::Pi),
            "phi" => Ok(NamedConstant::Phi),
            other => Err(format!("unknown constant `{other}`")),
        }
    }
}

const GUARD: u32 = 32;

// e = sum 1/j!; each truncating division loses < 1 ulp at the guarded precision.
fn euler(frac_bits: u32) -> Ball {
    let g = frac_bits + GUARD;
    let mut term = BigUint::one() << g;
    let mut sum = BigUint::zero();
    let mut j = 0u32;
    while !term.is_zero() {
        sum += &term;
        j += 1;
        term /= j;
    }
    // j truncations plus the dropped tail (< 1 ulp).
    let err_ulps = BigUint::from(j as u64 + 2);
    reduce(sum, err_ulps, GUARD, frac_bits)
}

// Machin: pi = 16 atan(1/5) - 4 atan(1/239).
fn pi(frac_bits: u32) -> Ball {
    let g = frac_bits + GUARD;
    let (a, na) = atan_inv(5, g);
    let (b, nb) = atan_inv(239, g);
    let v: BigInt = a * 16 - b * 4;
    let err_ulps = BigUint::from(16 * (na + 2) + 4 * (nb + 2));
    let v = v.to_biguint().expect("pi is positive");
    reduce(v, err_ulps, GUARD, frac_bits)
}

/// atan(1/x) * 2^g and the number of series terms used.
fn atan_inv(x: u32, g: u32) -> (BigInt, u64) {
    let x2 = BigUint::from(x) * x;
    let mut power = (BigUint::one() << g) / x;
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    while !power.is_zero() {
        let term = BigInt::from(&power / (2 * k + 1));
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &x2;
        k += 1;
    }
    (sum, k)
}

fn reduce(v: BigUint, err_ulps: BigUint, guard: u32, frac_bits: u32) -> Ball {
    let mid = &v >> guard;
    let rad = (err_ulps >> guard) + 2u32;
    Ball::new(mid, rad, frac_bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_match_f64() {
        for c in [NamedConstant::Sqrt2, NamedConstant::E, NamedConstant::Pi, NamedConstant::Phi] {
            let b = c.ball(200);
            let (lo, hi) = b.to_f64_bounds();
            assert!(lo <= c.approx() + 1e-15 && c.approx() - 1e-15 <= hi, "{c}: [{lo}, {hi}]");
            assert!(b.radius_log2() < -190.0);
        }
    }

    #[test]
    fn pi_digits() {
        // First 50 decimals of pi.
        let b = NamedConstant::Pi.ball(256);
        let scaled = (b.mid() * BigUint::from(10u32).pow(50)) >> 256u32;
        assert_eq!(
            scaled.to_string(),
            "314159265358979323846264338327950288419716939937510"
        );
    }

    #[test]
    fn sqrt2_squares_to_two() {
        let b = NamedConstant::Sqrt2.ball(300);
        let sq = b.mul(&b);
        let two = num_rational::BigRational::from_integer(BigInt::from(2));
        assert_eq!(sq.cmp_rational(&two), None);
    }
}
