//! Exact brute-force counts of admissible integer vectors, and log-log fits
//! of their growth.
//!
//! Every inequality is decided with outward-rounded intervals. Decisions that
//! cannot be certified are tallied in `boundary_ambiguous` and never counted.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interval::{Decision, Interval};
use crate::sequences::{materialize, LacunarySpec, PrecisionBudget};

/// Largest number of enumerated leaves accepted by any count.
pub const COST_LIMIT: f64 = 1e9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CountParams {
    Region { r: usize, m: i64, c: f64, constraint: Option<i64> },
    MainLemma { r: usize, m: i64, k: f64, mode: MainLemmaMode },
    Quadruple { k: usize, n: usize, epsilon: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub params: CountParams,
    pub count: u64,
    pub boundary_ambiguous: u64,
    /// All admissible vectors before the degeneracy split, when classified.
    pub admissible_total: Option<u64>,
    pub degenerate: Option<u64>,
    pub nondegenerate: Option<u64>,
    /// Degenerate witnesses whose pairing equations fail (always expected 0).
    pub pairing_violations: Option<u64>,
}

impl CountResult {
    fn new(params: CountParams, count: u64, boundary_ambiguous: u64) -> Self {
        CountResult {
            params,
            count,
            boundary_ambiguous,
            admissible_total: None,
            degenerate: None,
            nondegenerate: None,
            pairing_violations: None,
        }
    }

    pub fn family(&self) -> &'static str {
        match self.params {
            CountParams::Region { constraint: None, .. } => "region",
            CountParams::Region { .. } => "region_constrained",
            CountParams::MainLemma {
                mode: MainLemmaMode::DistinctZNonzeroY,
                ..
            } => "main_lemma",
            CountParams::MainLemma { .. } => "nondegenerate",
            CountParams::Quadruple { .. } => "quadruple",
        }
    }

    pub fn r_or_k(&self) -> usize {
        match self.params {
            CountParams::Region { r, .. } | CountParams::MainLemma { r, .. } => r,
            CountParams::Quadruple { k, .. } => k,
        }
    }

    pub fn m_or_n(&self) -> i64 {
        match self.params {
            CountParams::Region { m, .. } | CountParams::MainLemma { m, .. } => m,
            CountParams::Quadruple { n, .. } => n as i64,
        }
    }

    /// `K` for the main lemma, `epsilon` for quadruples, `C` for regions.
    pub fn k_or_eps(&self) -> f64 {
        match self.params {
            CountParams::Region { c, .. } => c,
            CountParams::MainLemma { k, .. } => k,
            CountParams::Quadruple { epsilon, .. } => epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionInstance {
    pub amplitudes: Vec<Interval>,
    pub b: Interval,
    pub c: f64,
    pub m: i64,
    /// Optional linear constraint `y_1 + ... + y_r = d`.
    pub constraint: Option<i64>,
}

impl RegionInstance {
    pub fn new(amplitudes: &[f64], b: f64, c: f64, m: i64) -> Result<Self> {
        let inst = RegionInstance {
            amplitudes: amplitudes.iter().map(|&a| Interval::point(a)).collect(),
            b: Interval::point(b),
            c,
            m,
            constraint: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_constraint(mut self, d: i64) -> Self {
        self.constraint = Some(d);
        self
    }

    fn validate(&self) -> Result<()> {
        let r = self.amplitudes.len();
        if r == 0 || r > 6 {
            return invalid(format!("region count needs 1 <= r <= 6, got {r}"));
        }
        if !(self.c >= 1.0) || self.m < 1 {
            return invalid("region count needs C >= 1 and M >= 1");
        }
        for w in self.amplitudes.windows(2) {
            if w[0].lo <= w[1].hi {
                return invalid("amplitudes must be strictly decreasing");
            }
        }
        if self.amplitudes[r - 1].lo <= 0.0 {
            return invalid("amplitudes must be positive");
        }
        Ok(())
    }
}

fn int_iv(y: i64) -> Interval {
    Interval::point(y as f64)
}

/// Candidate integers for `y` with `|y a + s| <= bound`, widened by two.
fn solve_candidates(s: Interval, a: Interval, bound: f64, m: i64) -> std::ops::RangeInclusive<i64> {
    let am = 0.5 * (a.lo + a.hi);
    let sm = 0.5 * (s.lo + s.hi);
    let center = -sm / am;
    let half = bound / am.abs() + s.width() / am.abs();
    let lo = ((center - half).floor() - 2.0).max(-(m as f64)) as i64;
    let hi = ((center + half).ceil() + 2.0).min(m as f64) as i64;
    lo..=hi
}

fn check_cost(leaves: f64, what: &str) -> Result<()> {
    if leaves > COST_LIMIT {
        return Err(Error::CostGuardExceeded(format!("{what}: {leaves:.3e} enumerations exceed {COST_LIMIT:e}")));
    }
    Ok(())
}

/// Integer vectors `|y_i| <= M` with `|y . A + b| <= C A_1` (optionally with
/// `sum y_i = d`). `y_2..y_r` are enumerated; `y_1` ranges over a solved
/// interval.
pub fn count_region(inst: &RegionInstance) -> Result<CountResult> {
    inst.validate()?;
    let r = inst.amplitudes.len();
    let m = inst.m;
    check_cost(((2 * m + 1) as f64).powi(r as i32 - 1), "region count")?;
    let a1 = inst.amplitudes[0];
    let rhs = Interval::point(inst.c) * a1;
    let span = 2 * m + 1;
    let leaves = (span as u64).pow(r as u32 - 1);

    let (count, amb) = (0..leaves)
        .into_par_iter()
        .fold(
            || (0u64, 0u64),
            |(mut count, mut amb), idx| {
                let mut rest = idx;
                let mut s = inst.b;
                let mut sum = 0i64;
                for a in &inst.amplitudes[1..] {
                    let y = (rest % span as u64) as i64 - m;
                    rest /= span as u64;
                    s = s + int_iv(y) * *a;
                    sum += y;
                }
                let mut decide = |y1: i64| match (int_iv(y1) * a1 + s).abs_le(&rhs) {
                    Decision::True => count += 1,
                    Decision::Ambiguous => amb += 1,
                    Decision::False => {}
                };
                match inst.constraint {
                    Some(d) => {
                        let y1 = d - sum;
                        if y1.abs() <= m {
                            decide(y1);
                        }
                    }
                    None => {
                        for y1 in solve_candidates(s, a1, rhs.hi, m) {
                            decide(y1);
                        }
                    }
                }
                (count, amb)
            },
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    Ok(CountResult::new(
        CountParams::Region {
            r,
            m,
            c: inst.c,
            constraint: inst.constraint,
        },
        count,
        amb,
    ))
}

/// `count / (C M^(r-1))`, the constant implied by the region bound.
pub fn region_ratio(result: &CountResult) -> f64 {
    match result.params {
        CountParams::Region { r, m, c, .. } => result.count as f64 / (c * (m as f64).powi(r as i32 - 1)),
        _ => f64::NAN,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MainLemmaMode {
    /// Distinct `z`, `y != 0`.
    DistinctZNonzeroY,
    /// Arbitrary `z`, counting non-degenerate vectors.
    Nondegenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MainLemmaInstance {
    pub r: usize,
    pub m: i64,
    pub k: f64,
    pub mode: MainLemmaMode,
    /// Enclosures of `a_1..a_M`.
    pub values: Vec<Interval>,
}

/// Enclosures of the first `n` sequence values as `f64` intervals.
pub fn sequence_intervals(spec: &LacunarySpec, n: usize) -> Result<Vec<Interval>> {
    let seq = materialize(spec, n, PrecisionBudget::default())?;
    Ok(seq
        .values()
        .iter()
        .map(|b| {
            let (lo, hi) = b.to_f64_bounds();
            Interval::new(lo, hi)
        })
        .collect())
}

impl MainLemmaInstance {
    pub fn new(r: usize, m: i64, k: f64, mode: MainLemmaMode, spec: &LacunarySpec) -> Result<Self> {
        if m < 1 {
            return invalid("M must be at least 1");
        }
        let values = sequence_intervals(spec, m as usize)?;
        Ok(MainLemmaInstance { r, m, k, mode, values })
    }

    fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > 4 {
            return invalid(format!("main lemma count needs 1 <= r <= 4, got {}", self.r));
        }
        if self.m < 1 || !(self.k >= 1.0) {
            return invalid("main lemma count needs M >= 1 and K >= 1");
        }
        if self.values.len() < self.m as usize {
            return invalid("fewer sequence values than M");
        }
        Ok(())
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    count: u64,
    total: u64,
    degenerate: u64,
    ambiguous: u64,
}

impl Tally {
    fn add(self, o: Tally) -> Tally {
        Tally {
            count: self.count + o.count,
            total: self.total + o.total,
            degenerate: self.degenerate + o.degenerate,
            ambiguous: self.ambiguous + o.ambiguous,
        }
    }
}

/// Whether `sum_{j : z_j = z_i} y_j = 0` for every `i`.
pub fn is_degenerate(y: &[i64], z: &[usize]) -> bool {
    let mut classes: BTreeMap<usize, i64> = BTreeMap::new();
    for (&yi, &zi) in y.iter().zip(z) {
        *classes.entry(zi).or_insert(0) += yi;
    }
    classes.values().all(|&s| s == 0)
}

struct YSearch<'a> {
    coeffs: Vec<Interval>,
    /// `sum_{i > j} M |B_i|`, the largest reachable remainder after index j.
    reach: Vec<f64>,
    k: Interval,
    m: i64,
    z: &'a [usize],
    mode: MainLemmaMode,
}

impl YSearch<'_> {
    fn leaf(&self, y: &[i64], decision: Decision, t: &mut Tally) {
        match decision {
            Decision::False => {}
            Decision::Ambiguous => t.ambiguous += 1,
            Decision::True => match self.mode {
                MainLemmaMode::DistinctZNonzeroY => {
                    if y.iter().any(|&v| v != 0) {
                        t.count += 1;
                        t.total += 1;
                    }
                }
                MainLemmaMode::Nondegenerate => {
                    t.total += 1;
                    if is_degenerate(y, self.z) {
                        t.degenerate += 1;
                    } else {
                        t.count += 1;
                    }
                }
            },
        }
    }

    // y has r slots; the last is fixed by the zero sum, the one before it
    // is solved from the interval constraint.
    fn walk(&self, j: usize, partial: Interval, sum: i64, y: &mut Vec<i64>, t: &mut Tally) {
        let r = y.len();
        let m = self.m;
        if j + 1 == r {
            y[j] = -sum;
            if sum.abs() <= m {
                self.leaf(y, partial.abs_le(&self.k), t);
            }
            return;
        }
        let b = self.coeffs[j];
        if j + 2 == r && !b.contains_zero() {
            // y_j + y_last = -sum, |y_last| <= M.
            let lo = (-m - sum).max(-m);
            let hi = (m - sum).min(m);
            for v in solve_candidates(partial, b, self.k.hi, m) {
                if v < lo || v > hi {
                    continue;
                }
                y[j] = v;
                y[j + 1] = -(sum + v);
                let val = partial + int_iv(v) * b;
                self.leaf(y, val.abs_le(&self.k), t);
            }
            return;
        }
        for v in -m..=m {
            let val = partial + int_iv(v) * b;
            if val.mig() > (self.k.hi + self.reach[j]) * (1.0 + 1e-12) + 1e-9 {
                continue;
            }
            y[j] = v;
            self.walk(j + 1, val, sum + v, y, t);
        }
    }
}

/// Admissible `(y, z)` for the main lemma (distinct `z`, nonzero `y`) or its
/// non-degenerate generalization (arbitrary `z`).
pub fn count_main_lemma(inst: &MainLemmaInstance) -> Result<CountResult> {
    inst.validate()?;
    let (r, m) = (inst.r, inst.m);
    check_cost(
        ((2 * m + 1) as f64).powi(r as i32) * (m as f64).powi(r as i32),
        "main lemma count",
    )?;
    let mu = m as usize;
    let tuples = (mu as u64).pow(r as u32);
    let kint = Interval::point(inst.k);

    let tally = (0..tuples)
        .into_par_iter()
        .fold(Tally::default, |t, idx| {
            let mut rest = idx;
            let z: Vec<usize> = (0..r)
                .map(|_| {
                    let v = (rest % mu as u64) as usize;
                    rest /= mu as u64;
                    v
                })
                .collect();
            if inst.mode == MainLemmaMode::DistinctZNonzeroY {
                let mut seen = z.clone();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() != r {
                    return t;
                }
            }
            let last = inst.values[z[r - 1]];
            let coeffs: Vec<Interval> = z[..r - 1]
                .iter()
                .map(|&zi| if zi == z[r - 1] { Interval::zero() } else { inst.values[zi] - last })
                .collect();
            let mut reach = vec![0.0; r];
            for j in (0..r.saturating_sub(1)).rev() {
                let next = if j + 1 < r - 1 { m as f64 * coeffs[j + 1].mag() } else { 0.0 };
                reach[j] = reach.get(j + 1).copied().unwrap_or(0.0) + next;
            }
            let search = YSearch {
                coeffs,
                reach,
                k: kint,
                m,
                z: &z,
                mode: inst.mode,
            };
            let mut local = Tally::default();
            let mut y = vec![0i64; r];
            search.walk(0, Interval::zero(), 0, &mut y, &mut local);
            t.add(local)
        })
        .reduce(Tally::default, Tally::add);

    let mut res = CountResult::new(
        CountParams::MainLemma {
            r,
            m,
            k: inst.k,
            mode: inst.mode,
        },
        tally.count,
        tally.ambiguous,
    );
    if inst.mode == MainLemmaMode::Nondegenerate {
        res.admissible_total = Some(tally.total);
        res.degenerate = Some(tally.degenerate);
        res.nondegenerate = Some(tally.count);
    }
    Ok(res)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadrupleInstance {
    pub k: usize,
    pub n: usize,
    pub epsilon: f64,
    pub values: Vec<Interval>,
}

impl QuadrupleInstance {
    pub fn new(k: usize, n: usize, epsilon: f64, spec: &LacunarySpec) -> Result<Self> {
        if k != 2 {
            return invalid("quadruple counts are implemented for k = 2 only");
        }
        if n < k {
            return invalid("N must be at least k");
        }
        if n > 32 {
            return Err(Error::CostGuardExceeded(format!("quadruple count limited to N <= 32, got {n}")));
        }
        if !(epsilon > 0.0) {
            return invalid("epsilon must be positive");
        }
        Ok(QuadrupleInstance {
            k,
            n,
            epsilon,
            values: sequence_intervals(spec, n)?,
        })
    }
}

/// Enclosure of `n^e`, widened by a few ulps around `powf`.
fn pow_interval(n: usize, e: f64) -> Interval {
    let v = (n as f64).powf(e);
    let mut lo = v;
    let mut hi = v;
    for _ in 0..4 {
        lo = lo.next_down();
        hi = hi.next_up();
    }
    Interval::new(lo, hi)
}

/// Quadruples `(n, m, w, w')` with `1 <= |n|, |m| <= N^(1+eps)`, distinct
/// pairs `w, w'` and `|n Delta(w) - m Delta(w')| <= N^eps`. `m` is solved
/// from the inequality for each `(n, w, w')`.
pub fn count_quadruples(inst: &QuadrupleInstance) -> Result<CountResult> {
    let n = inst.n;
    let range = pow_interval(n, 1.0 + inst.epsilon);
    let threshold = pow_interval(n, inst.epsilon);
    let mut ambiguous = 0u64;
    if range.lo.floor() != range.hi.floor() {
        ambiguous += 1;
    }
    let x = range.lo.floor() as i64;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let v = &inst.values;

    let tally = (1..=x)
        .flat_map(|t| [t, -t])
        .collect::<Vec<i64>>()
        .into_par_iter()
        .fold(
            || (Tally::default(), 0u64),
            |(mut t, mut viol), nn| {
                for &(w1, w2) in &pairs {
                    let lhs = int_iv(nn) * (v[w1] - v[w2]);
                    for &(u1, u2) in &pairs {
                        let dp = v[u1] - v[u2];
                        // |lhs - m dp| <= K  <=>  |m (-dp) + lhs| <= K.
                        for mm in solve_candidates(lhs, -dp, threshold.hi, x) {
                            if mm == 0 {
                                continue;
                            }
                            match (lhs - int_iv(mm) * dp).abs_le(&threshold) {
                                Decision::False => {}
                                Decision::Ambiguous => t.ambiguous += 1,
                                Decision::True => {
                                    t.total += 1;
                                    let y = [nn, -nn, -mm, mm];
                                    let z = [w1, w2, u1, u2];
                                    if is_degenerate(&y, &z) {
                                        t.degenerate += 1;
                                        if !pairing_holds(&y, &z, 2) {
                                            viol += 1;
                                        }
                                    }
                                    t.count += 1;
                                }
                            }
                        }
                    }
                }
                (t, viol)
            },
        )
        .reduce(|| (Tally::default(), 0), |a, b| (a.0.add(b.0), a.1 + b.1));

    let (t, violations) = tally;
    let mut res = CountResult::new(
        CountParams::Quadruple {
            k: inst.k,
            n,
            epsilon: inst.epsilon,
        },
        t.count,
        t.ambiguous + ambiguous,
    );
    res.admissible_total = Some(t.total);
    res.degenerate = Some(t.degenerate);
    res.nondegenerate = Some(t.total - t.degenerate);
    res.pairing_violations = Some(violations);
    Ok(res)
}

/// Pairing equations of a degenerate witness: each `z_i` (first half)
/// matched with an equal `z_(k+j)` has `y_i + y_(k+j) = 0`, and unmatched
/// coordinates vanish.
pub fn pairing_holds(y: &[i64], z: &[usize], k: usize) -> bool {
    let mut used = vec![false; k];
    for i in 0..k {
        match (0..k).find(|&j| !used[j] && z[k + j] == z[i]) {
            Some(j) => {
                used[j] = true;
                if y[i] + y[k + j] != 0 {
                    return false;
                }
            }
            None => {
                if y[i] != 0 {
                    return false;
                }
            }
        }
    }
    (0..k).all(|j| used[j] || y[k + j] == 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the log-scale residuals.
    pub residual: f64,
    pub points_used: usize,
}

/// Least-squares fit of `log count` against `log scale`. Points with a zero
/// count are dropped.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return invalid("scales must be strictly increasing");
    }
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(s, c)| c > 0.0 && s > 0.0)
        .map(|&(s, c)| (s.ln(), c.ln()))
        .collect();
    if kept.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} usable points, need 3", kept.len())));
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all scales coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = kept
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ExponentFit {
        slope,
        intercept,
        residual,
        points_used: kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> LacunarySpec {
        LacunarySpec::geometric_decimal("2", "1").unwrap()
    }

    #[test]
    fn region_examples() {
        let r = count_region(&RegionInstance::new(&[1.0], 0.0, 2.0, 10).unwrap()).unwrap();
        assert_eq!((r.count, r.boundary_ambiguous), (5, 0));
        let inst = RegionInstance::new(&[2.0, 1.0], 0.0, 1.0, 3).unwrap().with_constraint(0);
        assert_eq!(count_region(&inst).unwrap().count, 5);
        assert!(RegionInstance::new(&[1.0, 2.0], 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn main_lemma_examples() {
        for m in 1..5 {
            let inst = MainLemmaInstance::new(1, m, 2.0, MainLemmaMode::DistinctZNonzeroY, &two()).unwrap();
            assert_eq!(count_main_lemma(&inst).unwrap().count, 0);
        }
        let inst = MainLemmaInstance::new(2, 3, 2.0, MainLemmaMode::DistinctZNonzeroY, &two()).unwrap();
        let r = count_main_lemma(&inst).unwrap();
        assert_eq!((r.count, r.boundary_ambiguous), (4, 0));
    }

    #[test]
    fn quadruple_small_cases() {
        let r = count_quadruples(&QuadrupleInstance::new(2, 2, 0.1, &two()).unwrap()).unwrap();
        assert_eq!((r.count, r.boundary_ambiguous), (16, 0));
        let r = count_quadruples(&QuadrupleInstance::new(2, 3, 0.1, &two()).unwrap()).unwrap();
        assert_eq!((r.count, r.degenerate), (120, Some(72)));
        let r = count_quadruples(&QuadrupleInstance::new(2, 4, 0.1, &two()).unwrap()).unwrap();
        assert_eq!((r.count, r.degenerate, r.pairing_violations), (384, Some(192), Some(0)));
    }

    #[test]
    fn quadruple_guards() {
        assert!(QuadrupleInstance::new(3, 5, 0.1, &two()).is_err());
        assert!(matches!(QuadrupleInstance::new(2, 33, 0.1, &two()), Err(Error::CostGuardExceeded(_))));
    }

    #[test]
    fn fit_examples() {
        let f = fit_exponent(&[(2.0, 4.0), (4.0, 16.0), (8.0, 64.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.residual < 1e-12);
        let f = fit_exponent(&[(2.0, 4.0), (4.0, 17.0), (8.0, 60.0)]).unwrap();
        assert!((1.8..=2.1).contains(&f.slope));
        assert!((f.slope - 1.953_445_3).abs() < 1e-6);
        assert!(matches!(fit_exponent(&[(2.0, 4.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(
            fit_exponent(&[(2.0, 0.0), (4.0, 3.0), (8.0, 5.0)]),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn pairing_examples() {
        assert!(pairing_holds(&[1, -1, -1, 1], &[0, 1, 0, 1], 2));
        assert!(pairing_holds(&[1, -1, 1, -1], &[0, 1, 1, 0], 2));
        assert!(!pairing_holds(&[1, -1, -2, 2], &[0, 1, 0, 1], 2));
    }
}
