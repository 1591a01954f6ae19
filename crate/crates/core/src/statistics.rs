//! Gap distribution and k-level correlation sums of points on the circle.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sequences::TorusSample;
use crate::testfn::TestFunction;

const TWO_POW_M128: f64 = 1.0 / 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

/// Sorted points and normalized nearest-neighbour gaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub n: usize,
    pub ordered_points: Vec<f64>,
    /// `N (p_(i+1) - p_(i))`, with `p_(N+1) = 1 + p_(1)`.
    pub gaps: Vec<f64>,
    pub ks_distance: f64,
}

/// Bin edges and counts of a gap histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub fn gap_profile(sample: &TorusSample) -> Result<GapProfile> {
    let n = sample.len();
    if n < 2 {
        return invalid("gap profile needs at least two points");
    }
    let mut sorted = sample.fractions().to_vec();
    sorted.sort_unstable();
    let nf = n as f64;
    let mut gaps: Vec<f64> = sorted
        .windows(2)
        .map(|w| nf * ((w[1] - w[0]) as f64 * TWO_POW_M128))
        .collect();
    // Wrap-around gap 1 - (p_(N) - p_(1)), exact when all points coincide.
    let span = (sorted[n - 1] - sorted[0]) as f64 * TWO_POW_M128;
    gaps.push(nf * (1.0 - span));
    let ks_distance = ks_exponential(&gaps);
    Ok(GapProfile {
        n,
        ordered_points: sorted.iter().map(|&p| crate::sequences::fraction_to_f64(p)).collect(),
        gaps,
        ks_distance,
    })
}

/// Kolmogorov-Smirnov distance of an empirical sample from `1 - exp(-s)`.
pub fn ks_exponential(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let g = -(-x.max(0.0)).exp_m1();
        d = d.max((i + 1) as f64 / n - g).max(g - i as f64 / n);
    }
    d.clamp(0.0, 1.0)
}

impl GapProfile {
    pub fn gap_sum(&self) -> f64 {
        pairwise_sum(&self.gaps)
    }

    /// Fraction of gaps in `[lo, hi)`.
    pub fn empirical_measure(&self, lo: f64, hi: f64) -> f64 {
        self.gaps.iter().filter(|&&g| lo <= g && g < hi).count() as f64 / self.n as f64
    }

    /// The Poisson prediction `int_lo^hi e^-s ds` for comparison.
    pub fn poisson_measure(lo: f64, hi: f64) -> f64 {
        (-lo.max(0.0)).exp() - (-hi.max(0.0)).exp()
    }

    /// Histogram on `bins` equal bins over `[0, max_gap]`; the last bin is closed.
    pub fn histogram(&self, bins: usize, max_gap: f64) -> Histogram {
        let edges: Vec<f64> = (0..=bins).map(|i| max_gap * i as f64 / bins as f64).collect();
        let mut counts = vec![0u64; bins];
        for &g in &self.gaps {
            if g > max_gap || g < 0.0 {
                continue;
            }
            let idx = ((g / max_gap * bins as f64) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    DirectWindowed,
    NaiveReference,
    PoissonSummation { truncation: u64, tail_bound: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::DirectWindowed => "direct_windowed",
            Method::NaiveReference => "naive_reference",
            Method::PoissonSummation { .. } => "poisson_summation",
        }
    }

    pub fn tail_bound(&self) -> f64 {
        match self {
            Method::PoissonSummation { tail_bound, .. } => *tail_bound,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub k: usize,
    pub n: usize,
    pub value: f64,
    pub method: Method,
    pub test_function: String,
}

/// `C_k(N) = (1 - 1/N) ... (1 - (k-1)/N)`.
pub fn c_k_factor(k: usize, n: usize) -> Result<f64> {
    if k < 1 || n < k {
        return invalid(format!("C_k(N) needs N >= k >= 1, got k={k}, N={n}"));
    }
    let nf = n as f64;
    Ok((1..k).map(|j| (n - j) as f64 / nf).product())
}

/// Sums in a fixed binary tree so the result does not depend on threading.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Signed circular difference `u - v` reduced to `[-1/2, 1/2)`.
#[inline]
pub fn circular_difference(u: f64, v: f64) -> f64 {
    let d = u - v;
    if d >= 0.5 {
        d - 1.0
    } else if d < -0.5 {
        d + 1.0
    } else {
        d
    }
}

fn check_correlation_args(sample: &TorusSample, k: usize, tf: &TestFunction) -> Result<()> {
    if !(2..=4).contains(&k) {
        return invalid(format!("k must lie in 2..=4, got {k}"));
    }
    if tf.dim() != k - 1 {
        return invalid(format!("test function has dimension {}, k={k} needs {}", tf.dim(), k - 1));
    }
    if sample.len() < k {
        return invalid(format!("need at least k={k} points, got {}", sample.len()));
    }
    Ok(())
}

fn estimate(k: usize, n: usize, value: f64, method: Method, tf: &TestFunction) -> CorrelationEstimate {
    CorrelationEstimate {
        k,
        n,
        value,
        method,
        test_function: tf.to_string(),
    }
}

/// Circular neighbour lists: for each sorted position, the other positions
/// whose circular distance is at most `radius`.
fn neighbour_lists(sorted: &[f64], radius: f64) -> Vec<Vec<u32>> {
    let n = sorted.len();
    (0..n)
        .map(|i| {
            let mut out = Vec::new();
            let mut steps = 0;
            let mut j = i;
            while steps < n - 1 {
                j = if j + 1 == n { 0 } else { j + 1 };
                let fwd = sorted[j] - sorted[i];
                let fwd = if fwd < 0.0 { fwd + 1.0 } else { fwd };
                if fwd > radius {
                    break;
                }
                out.push(j as u32);
                steps += 1;
            }
            let mut j = i;
            while steps < n - 1 {
                j = if j == 0 { n - 1 } else { j - 1 };
                let bwd = sorted[i] - sorted[j];
                let bwd = if bwd < 0.0 { bwd + 1.0 } else { bwd };
                if bwd > radius {
                    break;
                }
                out.push(j as u32);
                steps += 1;
            }
            out
        })
        .collect()
}

/// `R_k` by circular neighbour windows, chaining `k-1` steps.
///
/// Requires `N > 2L`, so each coordinate has at most one contributing shift.
pub fn correlation_direct(sample: &TorusSample, k: usize, tf: &TestFunction) -> Result<CorrelationEstimate> {
    check_correlation_args(sample, k, tf)?;
    let n = sample.len();
    let l = tf.support_radius();
    if (n as f64) <= 2.0 * l {
        return Err(Error::SupportTooWide { n, two_l: 2.0 * l });
    }
    let mut sorted = sample.points_f64();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    // Slightly wide; the test function itself rejects what lies outside.
    let radius = (l / nf) * (1.0 + 1e-9) + 1e-15;
    let nbrs = neighbour_lists(&sorted, radius);

    let partials: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let mut x = [0.0f64; 3];
            let p = &sorted;
            for &j in &nbrs[i] {
                let j = j as usize;
                x[0] = nf * circular_difference(p[i], p[j]);
                if k == 2 {
                    acc += tf.evaluate(&x[..1]);
                    continue;
                }
                for &h in &nbrs[j] {
                    let h = h as usize;
                    if h == i {
                        continue;
                    }
                    x[1] = nf * circular_difference(p[j], p[h]);
                    if k == 3 {
                        acc += tf.evaluate(&x[..2]);
                        continue;
                    }
                    for &g in &nbrs[h] {
                        let g = g as usize;
                        if g == i || g == j {
                            continue;
                        }
                        x[2] = nf * circular_difference(p[h], p[g]);
                        acc += tf.evaluate(&x[..3]);
                    }
                }
            }
            acc
        })
        .collect();
    let value = pairwise_sum(&partials) / nf;
    Ok(estimate(k, n, value, Method::DirectWindowed, tf))
}

/// Largest `N` accepted by the naive reference for each `k`.
pub fn naive_limit(k: usize) -> usize {
    match k {
        2 | 3 => 500,
        _ => 80,
    }
}

/// `R_k` by enumerating every distinct ordered tuple and every shift `m` with
/// `|m|_inf <= 1 + ceil(L / N)`.
pub fn correlation_naive(sample: &TorusSample, k: usize, tf: &TestFunction) -> Result<CorrelationEstimate> {
    check_correlation_args(sample, k, tf)?;
    let n = sample.len();
    if n > naive_limit(k) {
        return Err(Error::CostGuardExceeded(format!(
            "naive k={k} correlation limited to N <= {}, got {n}",
            naive_limit(k)
        )));
    }
    let p = sample.points_f64();
    let nf = n as f64;
    let mmax = 1 + (tf.support_radius() / nf).ceil() as i64;
    let shifts: Vec<f64> = (-mmax..=mmax).map(|m| m as f64).collect();

    let partials: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut acc = 0.0;
            let mut x = [0.0f64; 3];
            for b in (0..n).filter(|&b| b != a) {
                let d0 = p[a] - p[b];
                for &m0 in &shifts {
                    x[0] = nf * (d0 - m0);
                    if k == 2 {
                        acc += tf.evaluate(&x[..1]);
                        continue;
                    }
                    for c in (0..n).filter(|&c| c != a && c != b) {
                        let d1 = p[b] - p[c];
                        for &m1 in &shifts {
                            x[1] = nf * (d1 - m1);
                            if k == 3 {
                                acc += tf.evaluate(&x[..2]);
                                continue;
                            }
                            for e in (0..n).filter(|&e| e != a && e != b && e != c) {
                                let d2 = p[c] - p[e];
                                for &m2 in &shifts {
                                    x[2] = nf * (d2 - m2);
                                    acc += tf.evaluate(&x[..3]);
                                }
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let value = pairwise_sum(&partials) / nf;
    Ok(estimate(k, n, value, Method::NaiveReference, tf))
}

const ANCHOR_EVERY: usize = 64;
const CHUNK: usize = 2048;

#[inline]
fn unit_phase(theta: u128) -> Complex64 {
    let t = (theta >> 75) as f64 * (1.0 / 9_007_199_254_740_992.0);
    let (s, c) = (TAU * t).sin_cos();
    Complex64::new(c, s)
}

/// `|S(j)|^2` for `j = 1..=t`, where `S(j) = sum_x e(j theta_x)` and each
/// phase `j theta_x` is reduced modulo one exactly in 128-bit fixed point.
pub fn exponential_sums(fractions: &[u128], t: u64) -> Vec<f64> {
    let t = t as usize;
    let chunks: Vec<(usize, usize)> = (1..=t).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(t + 1))).collect();
    let blocks: Vec<Vec<f64>> = chunks
        .into_par_iter()
        .map(|(start, end)| {
            let steps: Vec<Complex64> = fractions.iter().map(|&th| unit_phase(th)).collect();
            let mut w: Vec<Complex64> = Vec::with_capacity(fractions.len());
            let mut out = Vec::with_capacity(end - start);
            for j in start..end {
                if (j - start) % ANCHOR_EVERY == 0 {
                    w.clear();
                    w.extend(fractions.iter().map(|&th| unit_phase(th.wrapping_mul(j as u128))));
                }
                let mut s = Complex64::new(0.0, 0.0);
                for (wx, zx) in w.iter_mut().zip(&steps) {
                    s += *wx;
                    *wx *= *zx;
                }
                out.push(s.norm_sqr());
            }
            out
        })
        .collect();
    blocks.concat()
}

/// `R_2` through the dual sum
/// `C_2(N) f^(0) + N^-2 sum_{0<|j|<=T} f^(j/N) (|S(j)|^2 - N)`.
pub fn correlation_poisson_k2(sample: &TorusSample, tf: &TestFunction, truncation: u64) -> Result<CorrelationEstimate> {
    check_correlation_args(sample, 2, tf)?;
    if !tf.has_certified_decay() {
        return Err(Error::SlowDecay(format!("{tf} has no certified spectral tail")));
    }
    let n = sample.len();
    let tail_bound = tf.spectral_tail(n, truncation)?;
    // Phase error per term is about j 2^-bits; keep it far below the tail.
    let bits = sample.fraction_bits().min(128) as i32;
    if (truncation.max(1) as f64) * 2f64.powi(-bits) > 2f64.powi(-24) {
        return Err(Error::PrecisionExhausted(format!(
            "{bits}-bit points cannot support phases up to {truncation}"
        )));
    }
    let nf = n as f64;
    let mut value = c_k_factor(2, n)? * tf.fourier(&[0.0]).re;
    if truncation > 0 {
        let sums = exponential_sums(sample.fractions(), truncation);
        let terms: Vec<f64> = sums
            .iter()
            .enumerate()
            .map(|(i, &s2)| 2.0 * tf.fourier(&[(i + 1) as f64 / nf]).re * (s2 - nf))
            .collect();
        value += pairwise_sum(&terms) / (nf * nf);
    }
    let tail_bound = if truncation == 0 { f64::INFINITY } else { tail_bound };
    Ok(estimate(
        2,
        n,
        value,
        Method::PoissonSummation {
            truncation,
            tail_bound,
        },
        tf,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(points: &[f64]) -> TorusSample {
        TorusSample::from_f64_points(points).unwrap()
    }

    #[test]
    fn hand_gaps() {
        let g = gap_profile(&sample(&[0.2, 0.9, 0.5])).unwrap();
        for (got, want) in g.ordered_points.iter().zip([0.2, 0.5, 0.9]) {
            assert!((got - want).abs() < 1e-15);
        }
        for (got, want) in g.gaps.iter().zip([0.9, 1.2, 0.9]) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
        assert!((g.gap_sum() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn equally_spaced_gaps() {
        let n = 64;
        let pts: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
        let g = gap_profile(&sample(&pts)).unwrap();
        assert!(g.gaps.iter().all(|&x| x == 1.0));
        assert!((g.ks_distance - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn coincident_points_have_one_full_gap() {
        let g = gap_profile(&sample(&[0.0; 5])).unwrap();
        assert_eq!(g.gaps, vec![0.0, 0.0, 0.0, 0.0, 5.0]);
    }

    #[test]
    fn c_k_values() {
        assert!((c_k_factor(2, 10).unwrap() - 0.9).abs() < 1e-15);
        assert!((c_k_factor(3, 10).unwrap() - 0.72).abs() < 1e-15);
        assert!(c_k_factor(3, 2).is_err());
        let mut prev = 0.0;
        for n in 3..200 {
            let c = c_k_factor(3, n).unwrap();
            assert!(c > prev && c < 1.0);
            prev = c;
        }
    }

    #[test]
    fn naive_hand_examples() {
        let tf = TestFunction::symmetric_box(1, 1.2).unwrap();
        let s = sample(&[0.0, 0.5]);
        assert_eq!(correlation_naive(&s, 2, &tf).unwrap().value, 2.0);
        assert!(matches!(correlation_direct(&s, 2, &tf), Err(Error::SupportTooWide { .. })));

        let tri = TestFunction::triangle(1, 1.0).unwrap();
        let s = sample(&[0.0, 0.5, 0.25]);
        let r = correlation_naive(&s, 2, &tri).unwrap().value;
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(correlation_direct(&s, 2, &tri).unwrap().value, r);

        let narrow = TestFunction::triangle(1, 0.01).unwrap();
        assert_eq!(correlation_naive(&s, 2, &narrow).unwrap().value, 0.0);
    }

    #[test]
    fn naive_cost_guard() {
        let pts: Vec<f64> = (0..81).map(|j| j as f64 / 81.0).collect();
        let tf = TestFunction::triangle(3, 1.0).unwrap();
        assert!(matches!(correlation_naive(&sample(&pts), 4, &tf), Err(Error::CostGuardExceeded(_))));
    }

    #[test]
    fn poisson_rejects_box() {
        let tf = TestFunction::symmetric_box(1, 1.0).unwrap();
        let s = sample(&[0.1, 0.4, 0.8]);
        assert!(matches!(correlation_poisson_k2(&s, &tf, 10), Err(Error::SlowDecay(_))));
    }

    #[test]
    fn exponential_sums_match_direct_evaluation() {
        let pts = [0.123_456_789, 0.5, 0.987_654_321, 0.333];
        let s = sample(&pts);
        let sums = exponential_sums(s.fractions(), 300);
        let q = s.points_f64();
        for j in [1usize, 2, 63, 64, 65, 200, 300] {
            let mut z = Complex64::new(0.0, 0.0);
            for &x in &q {
                // Exact phase j*x mod 1: x has 53 fractional bits.
                let ph = (j as f64 * x).fract();
                z += Complex64::from_polar(1.0, TAU * ph);
            }
            assert!((sums[j - 1] - z.norm_sqr()).abs() < 1e-10, "j={j}");
        }
    }

    #[test]
    fn poisson_at_zero_truncation() {
        let tf = TestFunction::triangle(1, 1.0).unwrap();
        let s = sample(&[0.1, 0.35, 0.8, 0.55]);
        let e = correlation_poisson_k2(&s, &tf, 0).unwrap();
        assert_eq!(e.value, 0.75);
        assert!(e.method.tail_bound().is_infinite());
    }
}
