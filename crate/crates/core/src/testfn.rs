//! Compactly supported test functions on `R^dim` and their Fourier transforms.
//!
//! Convention: `f^(xi) = int f(x) e(-x.xi) dx` with `e(z) = exp(2 pi i z)`.
//! Every family is a tensor product of one-dimensional factors.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Indicator of a product of closed intervals `[lo_j, hi_j]`.
    Box { intervals: Vec<(f64, f64)> },
    /// Product of hats `max(0, 1 - |x_j| / L)`.
    Triangle,
    /// Product of `e * exp(-1 / (1 - (x_j / L)^2))`, peak 1 at the origin.
    Bump,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Box,
    Triangle,
    SmoothBump,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Box => "box",
            FamilyKind::Triangle => "triangle",
            FamilyKind::SmoothBump => "smooth_bump",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    dim: usize,
    family: Family,
    support_radius: f64,
    amplitude: f64,
}

/// Default absolute error requested from bump quadratures.
pub const BUMP_TOLERANCE: f64 = 1e-14;

fn check_radius(dim: usize, l: f64) -> Result<()> {
    if dim == 0 {
        return invalid("test function dimension must be at least 1");
    }
    if !(l.is_finite() && l > 0.0) {
        return invalid(format!("support radius must be positive, got {l}"));
    }
    Ok(())
}

impl TestFunction {
    pub fn triangle(dim: usize, l: f64) -> Result<Self> {
        check_radius(dim, l)?;
        Ok(TestFunction {
            dim,
            family: Family::Triangle,
            support_radius: l,
            amplitude: 1.0,
        })
    }

    /// Indicator of `[-L, L]^dim`.
    pub fn symmetric_box(dim: usize, l: f64) -> Result<Self> {
        check_radius(dim, l)?;
        Self::boxed(vec![(-l, l); dim])
    }

    /// Indicator of `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
    pub fn boxed(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return invalid("box intervals must satisfy lo < hi");
        }
        let l = intervals.iter().fold(0.0f64, |m, &(lo, hi)| m.max(lo.abs()).max(hi.abs()));
        check_radius(intervals.len(), l)?;
        Ok(TestFunction {
            dim: intervals.len(),
            family: Family::Box { intervals },
            support_radius: l,
            amplitude: 1.0,
        })
    }

    pub fn bump(dim: usize, l: f64) -> Result<Self> {
        check_radius(dim, l)?;
        Ok(TestFunction {
            dim,
            family: Family::Bump,
            support_radius: l,
            amplitude: 1.0,
        })
    }

    pub fn from_kind(kind: FamilyKind, dim: usize, l: f64) -> Result<Self> {
        match kind {
            FamilyKind::Box => Self::symmetric_box(dim, l),
            FamilyKind::Triangle => Self::triangle(dim, l),
            FamilyKind::SmoothBump => Self::bump(dim, l),
        }
    }

    /// `a * f`.
    pub fn scaled(mut self, a: f64) -> Self {
        self.amplitude *= a;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn kind(&self) -> FamilyKind {
        match self.family {
            Family::Box { .. } => FamilyKind::Box,
            Family::Triangle => FamilyKind::Triangle,
            Family::Bump => FamilyKind::SmoothBump,
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// One coordinate factor, without the amplitude.
    #[inline]
    pub fn factor(&self, j: usize, t: f64) -> f64 {
        let l = self.support_radius;
        match &self.family {
            Family::Triangle => (1.0 - t.abs() / l).max(0.0),
            Family::Box { intervals } => {
                let (lo, hi) = intervals[j];
                if lo <= t && t <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Bump => unit_bump(t / l),
        }
    }

    #[inline]
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut v = self.amplitude;
        for (j, &t) in x.iter().enumerate() {
            let f = self.factor(j, t);
            if f == 0.0 {
                return 0.0;
            }
            v *= f;
        }
        v
    }

    /// `int f`, closed form except for the bump (quadrature).
    pub fn integral(&self) -> f64 {
        let l = self.support_radius;
        let per: f64 = match &self.family {
            Family::Triangle => l.powi(self.dim as i32),
            Family::Box { intervals } => intervals.iter().map(|(lo, hi)| hi - lo).product(),
            Family::Bump => (l * bump_constants().integral).powi(self.dim as i32),
        };
        self.amplitude * per
    }

    pub fn fourier(&self, xi: &[f64]) -> Complex64 {
        self.fourier_with_tolerance(xi, BUMP_TOLERANCE)
    }

    /// `f^(xi)`; bump factors are computed by adaptive quadrature to `tol`.
    pub fn fourier_with_tolerance(&self, xi: &[f64], tol: f64) -> Complex64 {
        debug_assert_eq!(xi.len(), self.dim);
        let l = self.support_radius;
        let mut v = Complex64::new(self.amplitude, 0.0);
        for (j, &w) in xi.iter().enumerate() {
            let f = match &self.family {
                Family::Triangle => Complex64::new(l * sinc(l * w).powi(2), 0.0),
                Family::Box { intervals } => box_transform(intervals[j], w),
                Family::Bump => Complex64::new(l * unit_bump_transform(l * w, tol), 0.0),
            };
            v *= f;
        }
        v
    }

    /// Whether the transform decays fast enough for truncated Fourier sums.
    pub fn has_certified_decay(&self) -> bool {
        !matches!(self.family, Family::Box { .. })
    }

    /// Upper bound on `sum_{|j| > t} |f^(j / n)|` in dimension one.
    pub fn spectral_tail(&self, n: usize, t: u64) -> Result<f64> {
        if self.dim != 1 {
            return invalid("spectral tail bounds are one-dimensional");
        }
        if t == 0 {
            return Ok(f64::INFINITY);
        }
        let l = self.support_radius;
        // |f^(xi)| <= c / xi^2 and sum_{j > t} 1/j^2 <= 1/t.
        let c = match &self.family {
            Family::Triangle => 1.0 / (PI * PI * l),
            Family::Bump => bump_constants().second_derivative_l1 / (4.0 * PI * PI * l),
            Family::Box { .. } => return Err(Error::SlowDecay("box transform decays like 1/xi".into())),
        };
        let nn = n as f64;
        Ok(self.amplitude.abs() * 2.0 * c * nn * nn / t as f64 * (1.0 + 1e-12))
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(dim={}, L={}", self.kind(), self.dim, self.support_radius)?;
        if self.amplitude != 1.0 {
            write!(f, ", scale={}", self.amplitude)?;
        }
        f.write_str(")")
    }
}

#[inline]
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

fn box_transform((lo, hi): (f64, f64), w: f64) -> Complex64 {
    if w == 0.0 {
        return Complex64::new(hi - lo, 0.0);
    }
    let e = |x: f64| Complex64::from_polar(1.0, -2.0 * PI * x * w);
    (e(hi) - e(lo)) * Complex64::new(0.0, 1.0 / (2.0 * PI * w))
}

#[inline]
fn unit_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        E * (-1.0 / (1.0 - t * t)).exp()
    }
}

fn unit_bump_second_derivative(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - t * t;
    unit_bump(t) * (6.0 * t.powi(4) - 2.0) / s.powi(4)
}

struct BumpConstants {
    integral: f64,
    second_derivative_l1: f64,
}

fn bump_constants() -> &'static BumpConstants {
    static CELL: OnceLock<BumpConstants> = OnceLock::new();
    CELL.get_or_init(|| {
        let integral = quadrature::clenshaw_curtis::integrate(unit_bump, -1.0, 1.0, 1e-15).integral;
        let root = (1.0f64 / 3.0).powf(0.25);
        let piece = |a, b| {
            quadrature::double_exponential::integrate(|t| unit_bump_second_derivative(t).abs(), a, b, 1e-12)
                .integral
        };
        // Small margin: this feeds an upper bound.
        let second_derivative_l1 = 2.0 * (piece(0.0, root) + piece(root, 1.0)) * 1.001;
        BumpConstants {
            integral,
            second_derivative_l1,
        }
    })
}

/// `int_{-1}^{1} bump(t) cos(2 pi w t) dt`, split into pieces shorter than
/// one oscillation.
fn unit_bump_transform(w: f64, tol: f64) -> f64 {
    let pieces = (2.0 * w.abs()).ceil().max(1.0) as usize;
    let h = 1.0 / pieces as f64;
    let per = tol / (2.0 * pieces as f64);
    let mut total = 0.0;
    for i in 0..pieces {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        total += quadrature::double_exponential::integrate(|t| unit_bump(t) * (2.0 * PI * w * t).cos(), a, b, per)
            .integral;
    }
    2.0 * total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hat_values() {
        let f = TestFunction::triangle(1, 1.0).unwrap();
        assert_eq!(f.evaluate(&[0.0]), 1.0);
        assert_eq!(f.evaluate(&[1.0]), 0.0);
        assert_eq!(f.evaluate(&[-1.0]), 0.0);
        assert_eq!(f.evaluate(&[0.5]), 0.5);
    }

    #[test]
    fn box_values() {
        let f = TestFunction::symmetric_box(1, 1.0).unwrap();
        assert_eq!(f.evaluate(&[0.999]), 1.0);
        assert_eq!(f.evaluate(&[1.001]), 0.0);
        assert_eq!(f.evaluate(&[1.0]), 1.0);
    }

    #[test]
    fn triangle_transform_values() {
        let f = TestFunction::triangle(1, 1.0).unwrap();
        assert_eq!(f.fourier(&[0.0]).re, 1.0);
        assert!(f.fourier(&[1.0]).re.abs() < 1e-30);
        assert!(f.fourier(&[1.0]).norm() < 1e-16);
        let g = TestFunction::triangle(2, 0.5).unwrap();
        assert!((g.fourier(&[0.0, 0.0]).re - g.integral()).abs() < 1e-15);
    }

    #[test]
    fn transform_at_zero_is_integral() {
        for f in [
            TestFunction::triangle(2, 1.3).unwrap(),
            TestFunction::symmetric_box(1, 0.7).unwrap(),
            TestFunction::boxed(vec![(-0.2, 0.9), (0.1, 0.3)]).unwrap(),
            TestFunction::bump(1, 1.0).unwrap(),
            TestFunction::bump(2, 0.8).unwrap().scaled(3.0),
        ] {
            let z = vec![0.0; f.dim()];
            let got = f.fourier(&z);
            assert!((got.re - f.integral()).abs() < 1e-12, "{f}: {got} vs {}", f.integral());
            assert!(got.im.abs() < 1e-12);
        }
    }

    #[test]
    fn bump_integral_known_value() {
        // int_{-1}^{1} exp(-1/(1-t^2)) dt = 0.443993816168079...
        let f = TestFunction::bump(1, 1.0).unwrap();
        assert!((f.integral() - E * 0.443_993_816_168_079_4).abs() < 1e-13);
    }

    #[test]
    fn asymmetric_box_transform_matches_quadrature() {
        let f = TestFunction::boxed(vec![(-0.3, 0.8)]).unwrap();
        let w = 0.37;
        let got = f.fourier(&[w]);
        let re = quadrature::double_exponential::integrate(|x| (2.0 * PI * x * w).cos(), -0.3, 0.8, 1e-14).integral;
        let im = quadrature::double_exponential::integrate(|x| -(2.0 * PI * x * w).sin(), -0.3, 0.8, 1e-14).integral;
        assert!((got.re - re).abs() < 1e-12 && (got.im - im).abs() < 1e-12);
    }

    #[test]
    fn bump_transform_matches_direct_quadrature() {
        let f = TestFunction::bump(1, 1.5).unwrap();
        for w in [0.1, 0.9, 3.7] {
            let direct = quadrature::clenshaw_curtis::integrate(
                |x| unit_bump(x / 1.5) * (2.0 * PI * x * w).cos(),
                -1.5,
                1.5,
                1e-14,
            )
            .integral;
            assert!((f.fourier(&[w]).re - direct).abs() < 1e-11, "w={w}");
        }
    }

    #[test]
    fn triangle_poisson_self_check() {
        // sum_m f(x + m) = sum_n f^(n) e(n x), truncated at |n| <= 1000.
        let f = TestFunction::triangle(1, 1.0).unwrap();
        let tail: f64 = 2.0 * (1001..2_000_000).map(|n| 1.0 / (PI * n as f64).powi(2)).sum::<f64>();
        for x in [0.0, 0.13, 0.5, 0.77] {
            let lhs: f64 = (-3..=3).map(|m| f.evaluate(&[x + m as f64])).sum();
            let rhs: f64 = (-1000i64..=1000)
                .map(|n| f.fourier(&[n as f64]).re * (2.0 * PI * n as f64 * x).cos())
                .sum();
            assert!((lhs - rhs).abs() <= tail + 1e-12, "x={x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn spectral_tail_bounds_actual_tail() {
        for f in [TestFunction::triangle(1, 1.0).unwrap(), TestFunction::triangle(1, 0.4).unwrap()] {
            let (n, t) = (20usize, 200u64);
            let actual: f64 = 2.0 * (t + 1..200_000).map(|j| f.fourier(&[j as f64 / n as f64]).re.abs()).sum::<f64>();
            assert!(actual <= f.spectral_tail(n, t).unwrap());
        }
        let b = TestFunction::bump(1, 1.0).unwrap();
        let actual: f64 = 2.0 * (41..400).map(|j| b.fourier(&[j as f64 / 10.0]).re.abs()).sum::<f64>();
        assert!(actual <= b.spectral_tail(10, 40).unwrap());
        let x = TestFunction::symmetric_box(1, 1.0).unwrap();
        assert!(matches!(x.spectral_tail(10, 10), Err(Error::SlowDecay(_))));
    }

    #[test]
    fn constructor_validation() {
        assert!(TestFunction::triangle(0, 1.0).is_err());
        assert!(TestFunction::triangle(1, 0.0).is_err());
        assert!(TestFunction::boxed(vec![(1.0, 0.5)]).is_err());
    }
}
