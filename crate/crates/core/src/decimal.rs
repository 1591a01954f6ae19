//! Exact decimal literals.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{invalid, Result};

/// Parses `[-+]digits[.digits][e[-+]digits]` into an exact rational.
///
/// Returns the value and the number of fractional digits written after the
/// decimal point (the stated precision of a digit string).
pub fn parse_decimal(s: &str) -> Result<(BigRational, u64)> {
    let t = s.trim();
    if t.is_empty() {
        return invalid("empty decimal literal");
    }
    let (neg, body) = match t.as_bytes()[0] {
        b'-' => (true, &t[1..]),
        b'+' => (false, &t[1..]),
        _ => (false, t),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = body[i + 1..]
                .parse()
                .map_err(|_| crate::Error::InvalidInput(format!("bad exponent in `{s}`")))?;
            (&body[..i], e)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return invalid(format!("no digits in `{s}`"));
    }
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit() || b == b'_');
    if !all_digits(int_part) || !all_digits(frac_part) {
        return invalid(format!("not a decimal literal: `{s}`"));
    }
    let digits: String = int_part
        .chars()
        .chain(frac_part.chars())
        .filter(|c| *c != '_')
        .collect();
    let frac_digits = frac_part.chars().filter(|c| *c != '_').count() as i64;
    let m = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse::<BigInt>().expect("validated digits")
    };
    let scale = exp - frac_digits;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        BigRational::from_integer(m * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(m, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Ok((r, (frac_digits - exp).max(0) as u64))
}

pub fn rational(s: &str) -> Result<BigRational> {
    parse_decimal(s).map(|(r, _)| r)
}

/// Exact binary value of a finite `f64`.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| crate::Error::InvalidInput(format!("non-finite value {x}")))
}

/// Shortest decimal that round-trips through `f64`, read back as a rational.
pub fn rational_from_f64_decimal(x: f64) -> Result<BigRational> {
    rational(&format!("{x:e}"))
}

pub fn to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    let l = crate::fixed::biguint_log2(num) - crate::fixed::biguint_log2(den);
    let v = 2f64.powf(l);
    if r.is_negative() {
        -v
    } else {
        v
    }
}

pub fn log2(r: &BigRational) -> f64 {
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    crate::fixed::biguint_log2(num) - crate::fixed::biguint_log2(den)
}

pub fn is_integer(r: &BigRational) -> bool {
    r.denom().is_one()
}

pub fn magnitude_parts(r: &BigRational) -> (BigUint, BigUint) {
    (r.numer().magnitude().clone(), r.denom().magnitude().clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse_decimal("1.5").unwrap(), (r(3, 2), 1));
        assert_eq!(parse_decimal("-0.25").unwrap(), (r(-1, 4), 2));
        assert_eq!(parse_decimal("12").unwrap(), (r(12, 1), 0));
        assert_eq!(parse_decimal("1e-3").unwrap(), (r(1, 1000), 3));
        assert_eq!(parse_decimal("2.5E2").unwrap(), (r(250, 1), 0));
        assert_eq!(parse_decimal(".5").unwrap(), (r(1, 2), 1));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal("1.2.3").is_err());
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("-").is_err());
    }

    #[test]
    fn f64_decimal_reads_intended_value() {
        assert_eq!(rational_from_f64_decimal(1.1).unwrap(), r(11, 10));
        assert_eq!(rational_from_f64(0.5).unwrap(), r(1, 2));
    }
}
