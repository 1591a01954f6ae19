//! Real-valued lacunary sequences and their fractional parts `{alpha a_n}`.
//!
//! Values are carried as fixed-point [`Ball`]s with their full integer part.
//! The fractional part of `alpha a_n` is only taken at the very end, because
//! for an irrational ratio the recurrence `a_(n+1) = c a_n` does not commute
//! with reduction modulo one.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed};
use rayon::prelude::*;

use crate::constants::NamedConstant;
use crate::decimal::{self, parse_decimal};
use crate::error::{invalid, Error, Result};
use crate::fixed::Ball;

/// Where a ratio `c` comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseValue {
    /// Exact rational, e.g. the literal `1.5`.
    Exact(BigRational),
    /// A truncated digit string of an irrational number. Only the represented
    /// rational is certified; `digits` fractional digits were supplied.
    Digits { value: BigRational, digits: u64 },
    /// A constant computed internally to whatever precision is requested.
    Named(NamedConstant),
}

impl BaseValue {
    pub fn exact(s: &str) -> Result<Self> {
        Ok(BaseValue::Exact(decimal::rational(s)?))
    }

    /// Reads a digit string such as `2.71828182845904523536...`.
    pub fn digits(s: &str) -> Result<Self> {
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (value, digits) = parse_decimal(&cleaned)?;
        Ok(BaseValue::Digits { value, digits })
    }

    pub fn rational(&self) -> Option<&BigRational> {
        match self {
            BaseValue::Exact(r) | BaseValue::Digits { value: r, .. } => Some(r),
            BaseValue::Named(_) => None,
        }
    }

    pub fn approx(&self) -> f64 {
        match self {
            BaseValue::Exact(r) | BaseValue::Digits { value: r, .. } => decimal::to_f64(r),
            BaseValue::Named(c) => c.approx(),
        }
    }

    fn ball(&self, frac_bits: u32) -> Ball {
        match self {
            BaseValue::Exact(r) | BaseValue::Digits { value: r, .. } => Ball::from_rational(r, frac_bits),
            BaseValue::Named(c) => c.ball(frac_bits),
        }
    }

    /// Compares `self` against a rational; `None` if undecidable at 4096 bits.
    fn cmp_rational(&self, r: &BigRational) -> Option<Ordering> {
        match self.rational() {
            Some(v) => Some(v.cmp(r)),
            None => {
                for bits in [128u32, 1024, 4096] {
                    if let Some(o) = self.ball(bits).cmp_rational(r) {
                        return Some(o);
                    }
                }
                None
            }
        }
    }

    /// A rational lower bound for the value.
    fn rational_lower(&self) -> BigRational {
        match self.rational() {
            Some(r) => r.clone(),
            None => {
                let b = self.ball(64);
                BigRational::new(BigInt::from(b.lower()), BigInt::one() << 64u32)
            }
        }
    }
}

impl fmt::Display for BaseValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseValue::Exact(r) => write!(f, "{r}"),
            BaseValue::Digits { value, digits } => write!(f, "{}[{digits} digits]", decimal::to_f64(value)),
            BaseValue::Named(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SequenceKind {
    /// `a_n = scale * base^n`.
    Geometric { base: BaseValue, scale: BigRational },
    /// `a_n = scale * b^n` for an integer `b >= 2`.
    IntegerGeometric { base: u64, scale: BigRational },
    /// `a_n = scale * base^n * (1 + t_((n-1) mod len))`.
    PerturbedGeometric {
        base: BaseValue,
        scale: BigRational,
        perturbations: Vec<BigRational>,
    },
    /// Listed values `a_1, a_2, ...`.
    Explicit { values: Vec<BigRational> },
}

/// A lacunary sequence together with its declared ratio `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct LacunarySpec {
    kind: SequenceKind,
    declared_ratio: BigRational,
}

fn one() -> BigRational {
    BigRational::one()
}

impl LacunarySpec {
    pub fn geometric(base: BaseValue, scale: BigRational) -> Result<Self> {
        let declared = base.rational_lower();
        Self::build(SequenceKind::Geometric { base, scale }, declared)
    }

    /// Shorthand for a geometric sequence with exact decimal base and scale.
    pub fn geometric_decimal(base: &str, scale: &str) -> Result<Self> {
        Self::geometric(BaseValue::exact(base)?, decimal::rational(scale)?)
    }

    pub fn integer_geometric(base: u64, scale: BigRational) -> Result<Self> {
        if base < 2 {
            return invalid("integer base must be at least 2");
        }
        let declared = BigRational::from_integer(BigInt::from(base));
        Self::build(SequenceKind::IntegerGeometric { base, scale }, declared)
    }

    pub fn perturbed_geometric(base: BaseValue, scale: BigRational, perturbations: Vec<BigRational>) -> Result<Self> {
        if perturbations.is_empty() {
            return invalid("perturbation table is empty");
        }
        if perturbations.iter().any(|t| *t <= -one()) {
            return invalid("perturbations must exceed -1");
        }
        let len = perturbations.len();
        let worst = (0..len)
            .map(|j| (one() + &perturbations[(j + 1) % len]) / (one() + &perturbations[j]))
            .min()
            .expect("nonempty");
        let declared = base.rational_lower() * worst;
        Self::build(
            SequenceKind::PerturbedGeometric {
                base,
                scale,
                perturbations,
            },
            declared,
        )
    }

    pub fn explicit(values: Vec<BigRational>, declared_ratio: BigRational) -> Result<Self> {
        if values.is_empty() {
            return invalid("explicit sequence has no values");
        }
        Self::build(SequenceKind::Explicit { values }, declared_ratio)
    }

    fn build(kind: SequenceKind, declared_ratio: BigRational) -> Result<Self> {
        let spec = LacunarySpec { kind, declared_ratio };
        spec.check_static()?;
        Ok(spec)
    }

    /// Replaces the declared ratio `c`; it must still exceed one.
    pub fn with_declared_ratio(mut self, declared_ratio: BigRational) -> Result<Self> {
        self.declared_ratio = declared_ratio;
        self.check_static()?;
        Ok(self)
    }

    fn check_static(&self) -> Result<()> {
        if self.declared_ratio <= one() {
            return invalid(format!("declared ratio {} must exceed 1", self.declared_ratio));
        }
        match &self.kind {
            SequenceKind::Geometric { scale, .. }
            | SequenceKind::IntegerGeometric { scale, .. }
            | SequenceKind::PerturbedGeometric { scale, .. } => {
                if !scale.is_positive() {
                    return invalid("scale must be positive");
                }
            }
            SequenceKind::Explicit { values } => {
                if values.iter().any(|v| !v.is_positive()) {
                    return invalid("explicit values must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    pub fn declared_ratio(&self) -> &BigRational {
        &self.declared_ratio
    }

    pub fn family_name(&self) -> &'static str {
        match self.kind {
            SequenceKind::Geometric { .. } => "geometric",
            SequenceKind::IntegerGeometric { .. } => "integer_geometric",
            SequenceKind::PerturbedGeometric { .. } => "perturbed_geometric",
            SequenceKind::Explicit { .. } => "explicit",
        }
    }

    /// Whether every `a_n` is an integer (so rational dilations cluster).
    pub fn is_integer_valued(&self) -> bool {
        match &self.kind {
            SequenceKind::IntegerGeometric { scale, .. } => decimal::is_integer(scale),
            SequenceKind::Geometric {
                base: BaseValue::Exact(b),
                scale,
            } => decimal::is_integer(b) && decimal::is_integer(scale),
            SequenceKind::Explicit { values } => values.iter().all(decimal::is_integer),
            _ => false,
        }
    }

    fn base(&self) -> Option<BaseValue> {
        match &self.kind {
            SequenceKind::Geometric { base, .. } | SequenceKind::PerturbedGeometric { base, .. } => Some(base.clone()),
            SequenceKind::IntegerGeometric { base, .. } => {
                Some(BaseValue::Exact(BigRational::from_integer(BigInt::from(*base))))
            }
            SequenceKind::Explicit { .. } => None,
        }
    }

    fn scale(&self) -> Option<&BigRational> {
        match &self.kind {
            SequenceKind::Geometric { scale, .. }
            | SequenceKind::IntegerGeometric { scale, .. }
            | SequenceKind::PerturbedGeometric { scale, .. } => Some(scale),
            SequenceKind::Explicit { .. } => None,
        }
    }

    fn perturbation_factor(&self, n: usize) -> Option<BigRational> {
        match &self.kind {
            SequenceKind::PerturbedGeometric { perturbations, .. } => {
                Some(one() + &perturbations[(n - 1) % perturbations.len()])
            }
            _ => None,
        }
    }

    /// Upper estimate of `log2 a_n`, clamped at zero.
    pub fn log2_magnitude_upper(&self, n: usize) -> f64 {
        let l = match &self.kind {
            SequenceKind::Explicit { values } => {
                let idx = n.min(values.len()).max(1) - 1;
                decimal::log2(&values[idx])
            }
            _ => {
                let base = self.base().expect("geometric family");
                let c = base.approx();
                let mut l = n as f64 * c.log2() + decimal::log2(self.scale().expect("scale"));
                if let SequenceKind::PerturbedGeometric { perturbations, .. } = &self.kind {
                    let worst = perturbations
                        .iter()
                        .map(|t| decimal::log2(&(one() + t)))
                        .fold(f64::NEG_INFINITY, f64::max);
                    l += worst;
                }
                l
            }
        };
        // Margin for the f64 estimate of log2 c.
        (l * (1.0 + 1e-12) + 1e-9).max(0.0)
    }

    /// Rational ratio `c` of the geometric families, if exact.
    pub fn ratio_rational(&self) -> Option<BigRational> {
        self.base().and_then(|b| b.rational().cloned())
    }

    /// `a_1` as an exact rational when available, otherwise a lower bound.
    pub fn first_element_lower(&self) -> BigRational {
        match &self.kind {
            SequenceKind::Explicit { values } => values[0].clone(),
            _ => {
                let mut a1 = self.base().expect("geometric family").rational_lower() * self.scale().expect("scale");
                if let Some(t) = self.perturbation_factor(1) {
                    a1 *= t;
                }
                a1
            }
        }
    }

    pub fn first_element(&self) -> f64 {
        match &self.kind {
            SequenceKind::Explicit { values } => decimal::to_f64(&values[0]),
            _ => {
                let mut a1 = self.base().expect("geometric family").approx() * decimal::to_f64(self.scale().expect("scale"));
                if let Some(t) = self.perturbation_factor(1) {
                    a1 *= decimal::to_f64(&t);
                }
                a1
            }
        }
    }

    /// The interval-count constant `C = (a_1 (1 - 1/c))^-1`, with `c` the
    /// declared ratio. Rounded upward when `a_1` is irrational.
    pub fn interval_constant(&self) -> BigRational {
        let c = &self.declared_ratio;
        let a1 = self.first_element_lower();
        let denom = a1 * (one() - c.recip());
        denom.recip()
    }

    /// Certifies `a_(n+1) >= c a_n` for every `n < len` with exact rational
    /// ratios (or certified enclosures for internally computed constants).
    pub fn validate_prefix(&self, len: usize) -> Result<()> {
        let declared = &self.declared_ratio;
        let violation = |n: usize, ratio: f64| Error::LacunarityViolation {
            n,
            ratio: format!("{ratio}"),
            declared: format!("{}", decimal::to_f64(declared)),
        };
        match &self.kind {
            SequenceKind::Explicit { values } => {
                if len > values.len() {
                    return invalid(format!("explicit sequence has {} values, {len} requested", values.len()));
                }
                for n in 1..len {
                    let (a, b) = (&values[n - 1], &values[n]);
                    if *b < declared * a {
                        return Err(violation(n, decimal::to_f64(&(b / a))));
                    }
                }
            }
            SequenceKind::Geometric { base, .. } => check_base(base, declared, &violation)?,
            SequenceKind::IntegerGeometric { base, .. } => {
                if BigRational::from_integer(BigInt::from(*base)) < *declared {
                    return Err(violation(1, *base as f64));
                }
            }
            SequenceKind::PerturbedGeometric {
                base, perturbations, ..
            } => {
                let period = perturbations.len();
                for n in 1..len.min(period + 1) {
                    let t_prev = one() + &perturbations[(n - 1) % period];
                    let t_next = one() + &perturbations[n % period];
                    let needed = declared * &t_prev / &t_next;
                    match base.cmp_rational(&needed) {
                        Some(Ordering::Less) => {
                            return Err(violation(n, base.approx() * decimal::to_f64(&(t_next / t_prev))))
                        }
                        Some(_) => {}
                        None => return Err(Error::PrecisionExhausted(format!("cannot certify ratio at n={n}"))),
                    }
                }
            }
        }
        Ok(())
    }

    /// `a_n` as an exact rational, when the ratio is rational and the
    /// value fits under `hard_cap_bits`.
    pub fn exact_rational(&self, n: usize, hard_cap_bits: u64) -> Option<BigRational> {
        if n == 0 {
            return None;
        }
        match &self.kind {
            SequenceKind::Explicit { values } => values.get(n - 1).cloned(),
            _ => {
                let r = self.ratio_rational()?;
                let cost = n as u64 * (r.numer().bits() + r.denom().bits());
                if cost > hard_cap_bits {
                    return None;
                }
                let mut v = num_traits::pow(r, n) * self.scale().expect("scale");
                if let Some(t) = self.perturbation_factor(n) {
                    v *= t;
                }
                Some(v)
            }
        }
    }

    /// `a_n` by an independent route: exact integer powers (binary
    /// exponentiation) for rational ratios, ball powers otherwise.
    pub fn exact_value(&self, n: usize, frac_bits: u32, hard_cap_bits: u64) -> Result<Ball> {
        if n == 0 {
            return invalid("sequence indices start at 1");
        }
        let value = match &self.kind {
            SequenceKind::Explicit { values } => {
                let v = values
                    .get(n - 1)
                    .ok_or_else(|| Error::InvalidInput(format!("explicit sequence has no a_{n}")))?;
                return Ok(Ball::from_rational(v, frac_bits));
            }
            _ => {
                let base = self.base().expect("geometric family");
                let scale = self.scale().expect("scale");
                match base.rational() {
                    Some(r) => {
                        let (p, q) = decimal::magnitude_parts(r);
                        let cost = n as u64 * (p.bits() + q.bits()) + frac_bits as u64;
                        if cost > hard_cap_bits {
                            return Err(Error::PrecisionExhausted(format!(
                                "exact power of a_{n} needs {cost} bits, cap is {hard_cap_bits}"
                            )));
                        }
                        let (sn, sd) = decimal::magnitude_parts(scale);
                        let mut num = sn * num_traits::pow(p, n);
                        let mut den = sd * num_traits::pow(q, n);
                        if let Some(t) = self.perturbation_factor(n) {
                            let (tn, td) = decimal::magnitude_parts(&t);
                            num *= tn;
                            den *= td;
                        }
                        return Ok(Ball::from_ratio(&num, &den, frac_bits));
                    }
                    None => {
                        let extra = 2 * (64 - (n as u64).leading_zeros()) + 16;
                        let g = frac_bits + extra;
                        let mut v = base.ball(g).pow(n as u64).mul_rational(scale);
                        if let Some(t) = self.perturbation_factor(n) {
                            v = v.mul_rational(&t);
                        }
                        v
                    }
                }
            }
        };
        Ok(value.with_frac_bits(frac_bits))
    }
}

fn check_base(base: &BaseValue, declared: &BigRational, violation: &dyn Fn(usize, f64) -> Error) -> Result<()> {
    match base.cmp_rational(declared) {
        Some(Ordering::Less) => Err(violation(1, base.approx())),
        Some(_) => Ok(()),
        None => Err(Error::PrecisionExhausted("cannot certify base against declared ratio".into())),
    }
}

/// Fractional-bit budget for materialization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionBudget {
    /// Bits of every fractional part guaranteed correct.
    pub target_fraction_bits: u32,
    pub guard_bits: u32,
    /// Refuse any single value needing more bits than this.
    pub hard_cap_bits: u64,
    /// Largest dilation the materialized values will be multiplied by.
    pub alpha_upper: f64,
}

impl Default for PrecisionBudget {
    fn default() -> Self {
        PrecisionBudget {
            target_fraction_bits: 64,
            guard_bits: 32,
            hard_cap_bits: 1 << 22,
            alpha_upper: 1.0,
        }
    }
}

impl PrecisionBudget {
    pub fn with_alpha_upper(mut self, alpha_upper: f64) -> Self {
        self.alpha_upper = self.alpha_upper.max(alpha_upper);
        self
    }

    /// Bits needed so that `alpha a_n` is known to `target_fraction_bits`
    /// fractional bits: magnitude of `a_n` and of alpha plus target and guard.
    pub fn working_bits(&self, spec: &LacunarySpec, n: usize) -> u64 {
        let magnitude = spec.log2_magnitude_upper(n).ceil() as u64;
        let alpha_bits = self.alpha_upper.log2().ceil().max(0.0) as u64;
        magnitude + alpha_bits + self.target_fraction_bits as u64 + self.guard_bits as u64
    }
}

/// The first `N` values of a sequence, each an enclosure with `frac_bits`
/// fractional bits.
#[derive(Clone, Debug)]
pub struct MaterializedSequence {
    spec: LacunarySpec,
    budget: PrecisionBudget,
    frac_bits: u32,
    values: Vec<Ball>,
}

/// Materializes `a_1..a_N` with certified lacunarity.
///
/// Values are built by repeated multiplication of the unreduced enclosure by
/// the exact ratio, so every radius is tracked rigorously.
pub fn materialize(spec: &LacunarySpec, n: usize, budget: PrecisionBudget) -> Result<MaterializedSequence> {
    if n == 0 {
        return invalid("N must be at least 1");
    }
    if budget.target_fraction_bits == 0 || budget.target_fraction_bits > 120 {
        return invalid("target_fraction_bits must lie in 1..=120");
    }
    spec.validate_prefix(n)?;

    let named = matches!(spec.base(), Some(BaseValue::Named(_)));
    let mut frac_bits = budget.working_bits(spec, n);
    if named {
        frac_bits += 64 - (n as u64).leading_zeros() as u64 + 8;
    }
    let total = frac_bits + spec.log2_magnitude_upper(n).ceil() as u64;
    if total > budget.hard_cap_bits {
        return Err(Error::PrecisionExhausted(format!(
            "a_{n} needs {total} bits, hard cap is {}",
            budget.hard_cap_bits
        )));
    }
    let frac_bits = u32::try_from(frac_bits).map_err(|_| Error::PrecisionExhausted("fraction bits overflow".into()))?;

    if let Some(BaseValue::Digits { value, digits }) = spec.base() {
        check_digits(spec, &value, digits, n, &budget)?;
    }

    let values = match spec.kind() {
        SequenceKind::Explicit { values } => values[..n].iter().map(|v| Ball::from_rational(v, frac_bits)).collect(),
        _ => {
            let base = spec.base().expect("geometric family");
            let scale = spec.scale().expect("scale");
            let mut y = Ball::from_rational(scale, frac_bits);
            let mut out = Vec::with_capacity(n);
            let step: Box<dyn Fn(&Ball) -> Ball> = match base.rational() {
                Some(r) => {
                    let (p, q) = decimal::magnitude_parts(r);
                    Box::new(move |b: &Ball| b.mul_ratio(&p, &q))
                }
                None => {
                    let c = base.ball(frac_bits);
                    Box::new(move |b: &Ball| b.mul(&c))
                }
            };
            for i in 1..=n {
                y = step(&y);
                match spec.perturbation_factor(i) {
                    Some(t) => out.push(y.mul_rational(&t)),
                    None => out.push(y.clone()),
                }
            }
            out
        }
    };

    Ok(MaterializedSequence {
        spec: spec.clone(),
        budget,
        frac_bits,
        values,
    })
}

// A digit string pins c only to within 10^-digits; the induced error in
// alpha a_n is about alpha * scale * n * c^(n-1) * 10^-digits.
fn check_digits(spec: &LacunarySpec, c: &BigRational, digits: u64, n: usize, budget: &PrecisionBudget) -> Result<()> {
    let c = decimal::to_f64(c);
    let scale = spec.scale().map(decimal::to_f64).unwrap_or(1.0);
    let log2_err = budget.alpha_upper.max(1.0).log2()
        + scale.log2()
        + (n as f64).log2()
        + (n as f64 - 1.0) * c.log2();
    let needed_bits = log2_err + budget.target_fraction_bits as f64 + 1.0;
    let needed = (needed_bits / std::f64::consts::LOG2_10).ceil().max(0.0) as u64;
    if needed > digits {
        return Err(Error::InsufficientDigits {
            n,
            needed,
            supplied: digits,
        });
    }
    Ok(())
}

impl MaterializedSequence {
    pub fn spec(&self) -> &LacunarySpec {
        &self.spec
    }

    pub fn budget(&self) -> &PrecisionBudget {
        &self.budget
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn values(&self) -> &[Ball] {
        &self.values
    }

    /// `a_n`, 1-based.
    pub fn value(&self, n: usize) -> &Ball {
        &self.values[n - 1]
    }

    /// `{alpha a_n}` for `n = 1..=count`.
    pub fn fractional_parts(&self, alpha: &Dilation, count: usize) -> Result<TorusSample> {
        if count == 0 || count > self.len() {
            return invalid(format!("requested {count} points from a prefix of length {}", self.len()));
        }
        let target = self.budget.target_fraction_bits;
        let points: Result<Vec<u128>> = (0..count)
            .into_par_iter()
            .map(|i| {
                let b = alpha.apply(&self.values[i]);
                match certified_frac(&b, target) {
                    Some(p) => Ok(p),
                    None => self.retry_point(i + 1, alpha, 2 * self.frac_bits),
                }
            })
            .collect();
        Ok(TorusSample {
            alpha: Some(alpha.clone()),
            points: points?,
            fraction_bits: target,
        })
    }

    fn retry_point(&self, n: usize, alpha: &Dilation, frac_bits: u32) -> Result<u128> {
        let b = self
            .spec
            .exact_value(n, frac_bits, self.budget.hard_cap_bits)?;
        let b = alpha.apply(&b);
        match b.frac_u128() {
            None => Err(Error::NearIntegerAmbiguity { n }),
            Some((p, rad)) => {
                if radius_ok(&rad, self.budget.target_fraction_bits) {
                    Ok(p)
                } else {
                    Err(Error::PrecisionExhausted(format!("radius of alpha*a_{n} too large at {frac_bits} bits")))
                }
            }
        }
    }

    /// Recomputes point `n` through the exact-power route at `frac_bits`.
    pub fn recompute_point(&self, n: usize, alpha: &Dilation, frac_bits: u32) -> Result<u128> {
        self.retry_point(n, alpha, frac_bits)
    }

    /// `#{n <= N : lo <= a_n <= hi}` with certified comparisons.
    pub fn interval_count(&self, lo: &BigRational, hi: &BigRational) -> Result<usize> {
        if !lo.is_positive() || lo > hi {
            return invalid("interval must satisfy 0 < lo <= hi");
        }
        let mut count = 0;
        for (i, v) in self.values.iter().enumerate() {
            let inside = match (v.cmp_rational(lo), v.cmp_rational(hi)) {
                (Some(a), Some(b)) => a != Ordering::Less && b != Ordering::Greater,
                _ => {
                    if let Some(exact) = self.spec.exact_rational(i + 1, self.budget.hard_cap_bits) {
                        if exact >= *lo && exact <= *hi {
                            count += 1;
                        }
                        continue;
                    }
                    let refined = self
                        .spec
                        .exact_value(i + 1, 2 * self.frac_bits, self.budget.hard_cap_bits)?;
                    match (refined.cmp_rational(lo), refined.cmp_rational(hi)) {
                        (Some(a), Some(b)) => a != Ordering::Less && b != Ordering::Greater,
                        _ => {
                            return Err(Error::PrecisionExhausted(format!(
                                "a_{} too close to an interval endpoint",
                                i + 1
                            )))
                        }
                    }
                }
            };
            if inside {
                count += 1;
            }
        }
        Ok(count)
    }
}

fn radius_ok(rad_units: &BigUint, target: u32) -> bool {
    // Radius plus truncation (< one unit of 2^-128) must stay below 2^-target.
    rad_units.bits() < (127 - target) as u64
}

fn certified_frac(b: &Ball, target: u32) -> Option<u128> {
    let (p, rad) = b.frac_u128()?;
    radius_ok(&rad, target).then_some(p)
}

/// Materializes and takes fractional parts in one call.
pub fn fractional_parts(spec: &LacunarySpec, alpha: &Dilation, n: usize, budget: PrecisionBudget) -> Result<TorusSample> {
    let budget = budget.with_alpha_upper(alpha.to_f64());
    materialize(spec, n, budget)?.fractional_parts(alpha, n)
}

/// Result of counting sequence members in an interval.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalCount {
    pub count: usize,
    /// `C = (a_1 (1 - 1/c))^-1`.
    pub constant: BigRational,
    /// Whether `count <= C |I| + 1`.
    pub bound_holds: bool,
}

pub fn interval_count(seq: &MaterializedSequence, lo: &BigRational, hi: &BigRational) -> Result<IntervalCount> {
    let count = seq.interval_count(lo, hi)?;
    let constant = seq.spec().interval_constant();
    let bound = &constant * (hi - lo) + one();
    let bound_holds = BigRational::from_integer(BigInt::from(count)) <= bound;
    Ok(IntervalCount {
        count,
        constant,
        bound_holds,
    })
}

/// A positive dilation `alpha`: an exact rational or a computed constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dilation {
    Exact(BigRational),
    Named(NamedConstant),
}

impl Dilation {
    pub fn new(r: BigRational) -> Result<Self> {
        if !r.is_positive() {
            return invalid("alpha must be positive");
        }
        Ok(Dilation::Exact(r))
    }

    /// A decimal literal or one of the named constants (`sqrt2`, `pi`, ...).
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().parse::<NamedConstant>() {
            Ok(c) => Ok(Dilation::Named(c)),
            Err(_) => Dilation::new(decimal::rational(s)?),
        }
    }

    /// The exact binary value of `x`.
    pub fn from_f64(x: f64) -> Result<Self> {
        Dilation::new(decimal::rational_from_f64(x)?)
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Dilation::Exact(r) => Some(r),
            Dilation::Named(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Dilation::Exact(r) => decimal::to_f64(r),
            Dilation::Named(c) => c.approx(),
        }
    }

    /// `alpha * b`, keeping the fraction bits of `b`.
    pub fn apply(&self, b: &Ball) -> Ball {
        match self {
            Dilation::Exact(r) => b.mul_rational(r),
            Dilation::Named(c) => b.mul(&c.ball(b.frac_bits())),
        }
    }
}

impl fmt::Display for Dilation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dilation::Exact(_) => write!(f, "{}", self.to_f64()),
            Dilation::Named(c) => write!(f, "{c}"),
        }
    }
}

/// The points `{alpha a_n}` on the circle, as 128-bit fixed-point fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusSample {
    alpha: Option<Dilation>,
    points: Vec<u128>,
    fraction_bits: u32,
}

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

fn f64_to_fraction(x: f64) -> u128 {
    let scaled = x * TWO_POW_64;
    let hi = scaled.trunc();
    let lo = (scaled - hi) * TWO_POW_64;
    ((hi as u128) << 64) | (lo.trunc() as u128)
}

impl TorusSample {
    /// Wraps points given as `f64` values in `[0, 1)`; they are taken as exact.
    pub fn from_f64_points(points: &[f64]) -> Result<Self> {
        if points.iter().any(|p| !(0.0..1.0).contains(p)) {
            return invalid("torus points must lie in [0, 1)");
        }
        Ok(TorusSample {
            alpha: None,
            points: points.iter().map(|&p| f64_to_fraction(p)).collect(),
            fraction_bits: 53,
        })
    }

    pub fn from_fractions(points: Vec<u128>, fraction_bits: u32) -> Self {
        TorusSample {
            alpha: None,
            points,
            fraction_bits,
        }
    }

    pub fn alpha(&self) -> Option<&Dilation> {
        self.alpha.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bits of each point guaranteed correct.
    pub fn fraction_bits(&self) -> u32 {
        self.fraction_bits
    }

    pub fn fractions(&self) -> &[u128] {
        &self.points
    }

    /// Points truncated to `f64` (53 bits, always `< 1`).
    pub fn points_f64(&self) -> Vec<f64> {
        self.points.iter().map(|&p| fraction_to_f64(p)).collect()
    }

    /// The first `n` points.
    pub fn prefix(&self, n: usize) -> TorusSample {
        TorusSample {
            alpha: self.alpha.clone(),
            points: self.points[..n.min(self.points.len())].to_vec(),
            fraction_bits: self.fraction_bits,
        }
    }
}

pub fn fraction_to_f64(p: u128) -> f64 {
    (p >> 75) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Reads one decimal value per line; blank lines and `#` comments are skipped.
pub fn parse_value_lines(text: &str) -> Result<Vec<BigRational>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(decimal::rational)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        decimal::rational(s).unwrap()
    }

    #[test]
    fn geometric_two_powers() {
        let spec = LacunarySpec::geometric_decimal("2", "1").unwrap();
        let m = materialize(&spec, 4, PrecisionBudget::default()).unwrap();
        let got: Vec<f64> = m.values().iter().map(|b| b.to_f64()).collect();
        assert_eq!(got, vec![2.0, 4.0, 8.0, 16.0]);
        assert!(m.values().iter().all(Ball::is_exact));
    }

    #[test]
    fn explicit_violation_is_reported() {
        let spec = LacunarySpec::explicit(vec![q("1"), q("1.5"), q("2")], q("1.5")).unwrap();
        match materialize(&spec, 3, PrecisionBudget::default()) {
            Err(Error::LacunarityViolation { n, .. }) => assert_eq!(n, 2),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn declared_ratio_must_exceed_one() {
        let spec = LacunarySpec::geometric_decimal("2", "1").unwrap();
        assert!(spec.with_declared_ratio(q("1")).is_err());
        assert!(LacunarySpec::geometric_decimal("2", "0").is_err());
    }

    #[test]
    fn declared_above_base_is_a_violation() {
        let spec = LacunarySpec::geometric_decimal("1.5", "1").unwrap().with_declared_ratio(q("1.6")).unwrap();
        assert!(matches!(
            materialize(&spec, 3, PrecisionBudget::default()),
            Err(Error::LacunarityViolation { .. })
        ));
    }

    #[test]
    fn fractional_parts_small_cases() {
        let spec = LacunarySpec::geometric_decimal("2", "1").unwrap();
        let s = fractional_parts(&spec, &Dilation::parse("0.3").unwrap(), 3, PrecisionBudget::default()).unwrap();
        let pts = s.points_f64();
        for (p, want) in pts.iter().zip([0.6, 0.2, 0.4]) {
            assert!((p - want).abs() < 1e-15, "{p} vs {want}");
        }
        let s = fractional_parts(&spec, &Dilation::parse("1").unwrap(), 5, PrecisionBudget::default()).unwrap();
        assert!(s.fractions().iter().all(|&p| p == 0));
    }

    #[test]
    fn hard_cap_is_enforced() {
        let spec = LacunarySpec::geometric_decimal("2", "1").unwrap();
        let budget = PrecisionBudget {
            hard_cap_bits: 1000,
            ..Default::default()
        };
        assert!(matches!(materialize(&spec, 2000, budget), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn short_digit_string_is_refused() {
        let base = BaseValue::digits("2.718281828459045").unwrap();
        let spec = LacunarySpec::geometric(base, q("1")).unwrap();
        assert!(materialize(&spec, 5, PrecisionBudget::default()).is_err());
        let base = BaseValue::digits(&"2.".chars().chain(std::iter::repeat('7').take(200)).collect::<String>()).unwrap();
        let spec = LacunarySpec::geometric(base, q("1")).unwrap();
        assert!(materialize(&spec, 50, PrecisionBudget::default()).is_ok());
        assert!(matches!(
            materialize(&spec, 1000, PrecisionBudget::default()),
            Err(Error::InsufficientDigits { .. })
        ));
    }

    #[test]
    fn named_base_matches_power_route() {
        let spec = LacunarySpec::geometric(BaseValue::Named(NamedConstant::Sqrt2), q("1")).unwrap();
        let m = materialize(&spec, 60, PrecisionBudget::default()).unwrap();
        let alpha = Dilation::parse("1.37").unwrap();
        let s = m.fractional_parts(&alpha, 60).unwrap();
        for n in [1usize, 17, 60] {
            let p = m.recompute_point(n, &alpha, 2 * m.frac_bits()).unwrap();
            let d = s.fractions()[n - 1].abs_diff(p);
            assert!(d < 1u128 << 64, "n={n}");
        }
    }

    #[test]
    fn irrational_dilation_matches_quadrupled_precision() {
        let spec = LacunarySpec::geometric_decimal("1.1", "1").unwrap();
        let alpha = Dilation::parse("sqrt2").unwrap();
        let budget = PrecisionBudget::default().with_alpha_upper(alpha.to_f64());
        let m = materialize(&spec, 100, budget).unwrap();
        let s = m.fractional_parts(&alpha, 100).unwrap();
        for n in 1..=100 {
            let p = m.recompute_point(n, &alpha, 4 * m.frac_bits()).unwrap();
            assert!(s.fractions()[n - 1].abs_diff(p) < 1u128 << 64, "n={n}");
        }
    }

    #[test]
    fn perturbed_default_ratio_validates() {
        let spec = LacunarySpec::perturbed_geometric(
            BaseValue::exact("2").unwrap(),
            q("1"),
            vec![q("0.1"), q("-0.1"), q("0")],
        )
        .unwrap();
        materialize(&spec, 10, PrecisionBudget::default()).unwrap();
        let a1 = spec.first_element();
        assert!((a1 - 2.2).abs() < 1e-12);
    }

    #[test]
    fn integer_valued_detection() {
        assert!(LacunarySpec::geometric_decimal("2", "1").unwrap().is_integer_valued());
        assert!(!LacunarySpec::geometric_decimal("1.5", "1").unwrap().is_integer_valued());
        assert!(LacunarySpec::integer_geometric(3, q("2")).unwrap().is_integer_valued());
    }

    #[test]
    fn f64_points_round_trip() {
        let pts = [0.0, 0.5, 0.25, 0.999_999_999_999];
        let s = TorusSample::from_f64_points(&pts).unwrap();
        assert_eq!(s.points_f64(), pts.to_vec());
        assert!(TorusSample::from_f64_points(&[1.0]).is_err());
    }
}
