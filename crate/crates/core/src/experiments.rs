//! Seeded Monte Carlo experiments over the dilation `alpha`.
//!
//! Each `(N, sample index)` pair draws its alpha from its own ChaCha8 stream
//! position (`stream = N`, `word_pos = 16 * index`), so the draws do not
//! depend on thread count or evaluation order.

use num_traits::ToPrimitive;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::fit_exponent;
use crate::error::{invalid, Error, Result};
use crate::sequences::{materialize, Dilation, LacunarySpec, MaterializedSequence, PrecisionBudget, TorusSample};
use crate::statistics::{c_k_factor, correlation_direct, gap_profile};
use crate::testfn::{FamilyKind, TestFunction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum AlphaLaw {
    /// Uniform on `J = [lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Uniform on `[lo - margin, hi + margin]`, weighted by a smooth window
    /// `rho` equal to one on `J`.
    Weighted { lo: f64, hi: f64, margin: f64 },
}

impl AlphaLaw {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi, margin) = match *self {
            AlphaLaw::Uniform { lo, hi } => (lo, hi, 0.0),
            AlphaLaw::Weighted { lo, hi, margin } => (lo, hi, margin),
        };
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || !(margin >= 0.0) {
            return invalid("alpha window must satisfy lo < hi and margin >= 0");
        }
        if lo - margin <= 0.0 {
            return invalid("alpha window must stay positive");
        }
        Ok(())
    }

    /// The interval actually sampled.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            AlphaLaw::Uniform { lo, hi } => (lo, hi),
            AlphaLaw::Weighted { lo, hi, margin } => (lo - margin, hi + margin),
        }
    }

    pub fn upper(&self) -> f64 {
        self.support().1
    }

    /// The weight `rho(alpha)`.
    pub fn weight(&self, alpha: f64) -> f64 {
        match *self {
            AlphaLaw::Uniform { lo, hi } => {
                if (lo..=hi).contains(&alpha) {
                    1.0
                } else {
                    0.0
                }
            }
            AlphaLaw::Weighted { lo, hi, margin } => {
                let t = if alpha < lo {
                    (lo - alpha) / margin
                } else if alpha > hi {
                    (alpha - hi) / margin
                } else {
                    0.0
                };
                if t >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - t * t)).exp()
                }
            }
        }
    }

    /// The `index`-th alpha for prefix length `n`.
    pub fn sample(&self, seed: u64, n: usize, index: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        rng.set_word_pos(16 * index as u128);
        let u: f64 = rng.gen();
        let (a, b) = self.support();
        a + (b - a) * u
    }
}

/// How the test function is declared; its dimension follows from `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub family: FamilyKind,
    pub support_radius: f64,
    pub scale: f64,
}

impl Default for TestFunctionSpec {
    fn default() -> Self {
        TestFunctionSpec {
            family: FamilyKind::Triangle,
            support_radius: 1.0,
            scale: 1.0,
        }
    }
}

impl TestFunctionSpec {
    pub fn build(&self, k: usize) -> Result<TestFunction> {
        if k < 2 {
            return invalid("k must be at least 2");
        }
        Ok(TestFunction::from_kind(self.family, k - 1, self.support_radius)?.scaled(self.scale))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub sequence: LacunarySpec,
    pub k_list: Vec<usize>,
    pub n_ladder: Vec<usize>,
    pub alpha_law: AlphaLaw,
    pub samples_per_n: usize,
    pub seed: u64,
    pub test_function: TestFunctionSpec,
    /// Allowed excess over the exponent `-1` of the variance decay.
    pub eta_slack: f64,
    pub precision: PrecisionBudget,
    pub budget_seconds: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(sequence: LacunarySpec, n_ladder: Vec<usize>, samples_per_n: usize, seed: u64) -> Self {
        ExperimentConfig {
            sequence,
            k_list: vec![2],
            n_ladder,
            alpha_law: AlphaLaw::Uniform { lo: 1.0, hi: 2.0 },
            samples_per_n,
            seed,
            test_function: TestFunctionSpec::default(),
            eta_slack: 0.3,
            precision: PrecisionBudget::default(),
            budget_seconds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ladder.is_empty() || self.n_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("N ladder must be nonempty and strictly increasing");
        }
        if self.n_ladder[0] < 2 {
            return invalid("N must be at least 2");
        }
        if self.samples_per_n < 2 {
            return invalid("samples_per_N must be at least 2");
        }
        if self.k_list.is_empty() || self.k_list.iter().any(|&k| !(2..=4).contains(&k)) {
            return invalid("k values must lie in 2..=4");
        }
        self.alpha_law.validate()?;
        for &k in &self.k_list {
            self.test_function.build(k)?;
        }
        Ok(())
    }

    fn budget_for_run(&self) -> PrecisionBudget {
        self.precision.with_alpha_upper(self.alpha_law.upper())
    }

    /// Rough wall-clock prediction in seconds for `work`.
    pub fn predicted_seconds(&self, work: Work) -> f64 {
        let budget = self.budget_for_run();
        let l = self.test_function.support_radius;
        let s = self.samples_per_n as f64;
        self.n_ladder
            .iter()
            .map(|&n| {
                let nf = n as f64;
                let words = budget.working_bits(&self.sequence, n) as f64 / 64.0 + 1.0;
                let materialize = nf * words * 4e-9;
                let fracs = s * nf * words * 3e-9;
                let per_sample = match work {
                    Work::Correlation => self
                        .k_list
                        .iter()
                        .map(|&k| nf * (nf.log2() * 2e-8 + (2.0 * l + 1.0).powi(k as i32 - 1) * 3e-8))
                        .sum::<f64>(),
                    Work::Gaps => nf * nf.log2() * 2e-8,
                };
                materialize + fracs + s * per_sample
            })
            .sum()
    }

    pub fn check_budget(&self, work: Work) -> Result<()> {
        if let Some(budget) = self.budget_seconds {
            let predicted = self.predicted_seconds(work);
            if predicted > budget {
                return Err(Error::BudgetExceeded {
                    predicted_seconds: predicted,
                    budget_seconds: budget,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Work {
    Correlation,
    Gaps,
}

/// One sampled dilation and its torus sample.
pub struct SampleContext<'a> {
    pub n: usize,
    pub index: usize,
    pub alpha: Dilation,
    pub sample: TorusSample,
    pub sequence: &'a MaterializedSequence,
}

/// Materializes each prefix once and evaluates `f` on every sample, in
/// `(N, index)` order.
pub fn for_each_sample<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SampleContext<'_>) -> Result<T> + Sync,
{
    cfg.validate()?;
    let budget = cfg.budget_for_run();
    let mut out = Vec::with_capacity(cfg.n_ladder.len() * cfg.samples_per_n);
    for &n in &cfg.n_ladder {
        let seq = materialize(&cfg.sequence, n, budget)?;
        let rows: Result<Vec<T>> = (0..cfg.samples_per_n)
            .into_par_iter()
            .map(|index| {
                let alpha = Dilation::from_f64(cfg.alpha_law.sample(cfg.seed, n, index))?;
                let sample = seq.fractional_parts(&alpha, n)?;
                f(&SampleContext {
                    n,
                    index,
                    alpha,
                    sample,
                    sequence: &seq,
                })
            })
            .collect();
        out.extend(rows?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub k: usize,
    pub n: usize,
    pub sample: usize,
    pub alpha: f64,
    pub value: f64,
    /// `C_k(N) int f`.
    pub reference: f64,
    pub deviation: f64,
}

fn correlation_rows(ctx: &SampleContext<'_>, cfg: &ExperimentConfig) -> Result<Vec<CorrelationRow>> {
    cfg.k_list
        .iter()
        .map(|&k| {
            let tf = cfg.test_function.build(k)?;
            let value = correlation_direct(&ctx.sample, k, &tf)?.value;
            let reference = c_k_factor(k, ctx.n)? * tf.integral();
            Ok(CorrelationRow {
                k,
                n: ctx.n,
                sample: ctx.index,
                alpha: ctx.alpha.to_f64(),
                value,
                reference,
                deviation: (value - reference).abs(),
            })
        })
        .collect()
}

/// `R_k` by the direct method for each `N`, seeded alpha and `k`.
pub fn run_correlation_experiment(cfg: &ExperimentConfig) -> Result<Vec<CorrelationRow>> {
    cfg.check_budget(Work::Correlation)?;
    let nested = for_each_sample(cfg, |ctx| correlation_rows(ctx, cfg))?;
    Ok(nested.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub sample: usize,
    pub alpha: f64,
    pub ks_distance: f64,
    /// Integer sequence with a rational alpha of small denominator: points
    /// cluster on a finite set and Poisson gaps are not expected.
    pub expected_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub n: usize,
    pub samples: usize,
    pub mean_ks: f64,
    pub median_ks: f64,
    pub max_ks: f64,
}

/// Whether `{alpha a_n}` must lie on a small finite set.
pub fn expected_degenerate(spec: &LacunarySpec, alpha: &Dilation, n: usize) -> bool {
    match alpha.as_rational() {
        Some(r) if spec.is_integer_valued() => {
            // {p a_n / q} takes at most q values.
            r.denom().to_u64().map_or(false, |q| q <= n as u64)
        }
        _ => false,
    }
}

fn gap_row(ctx: &SampleContext<'_>, spec: &LacunarySpec) -> Result<GapRow> {
    let g = gap_profile(&ctx.sample)?;
    Ok(GapRow {
        n: ctx.n,
        sample: ctx.index,
        alpha: ctx.alpha.to_f64(),
        ks_distance: g.ks_distance,
        expected_degenerate: expected_degenerate(spec, &ctx.alpha, ctx.n),
    })
}

pub fn run_gap_experiment(cfg: &ExperimentConfig) -> Result<(Vec<GapRow>, Vec<GapSummary>)> {
    cfg.check_budget(Work::Gaps)?;
    let rows = for_each_sample(cfg, |ctx| gap_row(ctx, &cfg.sequence))?;
    let summary = summarize_gaps(&rows);
    Ok((rows, summary))
}

pub fn summarize_gaps(rows: &[GapRow]) -> Vec<GapSummary> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let mut ks: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.ks_distance).collect();
            ks.sort_by(f64::total_cmp);
            let m = ks.len();
            let median = if m % 2 == 1 {
                ks[m / 2]
            } else {
                0.5 * (ks[m / 2 - 1] + ks[m / 2])
            };
            GapSummary {
                n,
                samples: m,
                mean_ks: ks.iter().sum::<f64>() / m as f64,
                median_ks: median,
                max_ks: ks[m - 1],
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub k: usize,
    pub n: usize,
    pub num_samples: usize,
    pub mean_rk: f64,
    /// Estimate of `int |R_k - C_k(N) int f|^2 rho(alpha) d alpha`.
    pub variance: f64,
    pub standard_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub k: usize,
    pub slope: f64,
    pub intercept: f64,
    pub standard_error: f64,
}

/// A weighted sample `(rho(alpha), R_k(alpha))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedValue {
    pub weight: f64,
    pub value: f64,
}

/// `|S| mean(rho (R - center)^2)` and its standard error.
pub fn variance_about(values: &[WeightedValue], center: f64, support_length: f64) -> (f64, f64) {
    let terms: Vec<f64> = values
        .iter()
        .map(|v| support_length * v.weight * (v.value - center).powi(2))
        .collect();
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// A per-sample statistic standing in for `R_k` (test hook).
pub type Statistic<'a> = dyn Fn(&SampleContext<'_>, usize, &TestFunction) -> Result<f64> + Sync + 'a;

/// Variance rows for every `(k, N)` using `stat` in place of `R_k`.
pub fn variance_table_with(cfg: &ExperimentConfig, stat: &Statistic<'_>) -> Result<Vec<VarianceEstimate>> {
    cfg.check_budget(Work::Correlation)?;
    let functions: Vec<TestFunction> = cfg.k_list.iter().map(|&k| cfg.test_function.build(k)).collect::<Result<_>>()?;
    let values = for_each_sample(cfg, |ctx| {
        let weight = cfg.alpha_law.weight(ctx.alpha.to_f64());
        cfg.k_list
            .iter()
            .zip(&functions)
            .map(|(&k, tf)| Ok(WeightedValue { weight, value: stat(ctx, k, tf)? }))
            .collect::<Result<Vec<_>>>()
    })?;
    let (a, b) = cfg.alpha_law.support();
    let mut rows = Vec::new();
    for (ni, &n) in cfg.n_ladder.iter().enumerate() {
        let block = &values[ni * cfg.samples_per_n..(ni + 1) * cfg.samples_per_n];
        for (ki, (&k, tf)) in cfg.k_list.iter().zip(&functions).enumerate() {
            let vals: Vec<WeightedValue> = block.iter().map(|v| v[ki]).collect();
            let center = c_k_factor(k, n)? * tf.integral();
            let (variance, standard_error) = variance_about(&vals, center, b - a);
            rows.push(VarianceEstimate {
                k,
                n,
                num_samples: vals.len(),
                mean_rk: vals.iter().map(|v| v.value).sum::<f64>() / vals.len() as f64,
                variance,
                standard_error,
            });
        }
    }
    Ok(rows)
}

pub fn variance_table(cfg: &ExperimentConfig) -> Result<Vec<VarianceEstimate>> {
    variance_table_with(cfg, &|ctx, k, tf| Ok(correlation_direct(&ctx.sample, k, tf)?.value))
}

/// Log-log slope of variance against `N` for one `k`, with the standard
/// error propagated from the per-point standard errors.
pub fn fit_variance_slope(rows: &[VarianceEstimate], k: usize) -> Result<SlopeEstimate> {
    let pts: Vec<&VarianceEstimate> = rows.iter().filter(|r| r.k == k).collect();
    let fit = fit_exponent(&pts.iter().map(|r| (r.n as f64, r.variance)).collect::<Vec<_>>())?;
    let used: Vec<&&VarianceEstimate> = pts.iter().filter(|r| r.variance > 0.0).collect();
    let xs: Vec<f64> = used.iter().map(|r| (r.n as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let var: f64 = used
        .iter()
        .zip(&xs)
        .map(|(r, x)| {
            let c = (x - mx) / sxx;
            let se_log = r.standard_error / r.variance;
            c * c * se_log * se_log
        })
        .sum();
    Ok(SlopeEstimate {
        k,
        slope: fit.slope,
        intercept: fit.intercept,
        standard_error: var.sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub rows: Vec<VarianceEstimate>,
    pub slopes: Vec<SlopeEstimate>,
}

pub fn run_variance_ladder(cfg: &ExperimentConfig) -> Result<VarianceReport> {
    let rows = variance_table(cfg)?;
    let slopes = cfg
        .k_list
        .iter()
        .map(|&k| fit_variance_slope(&rows, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(VarianceReport { rows, slopes })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub k: usize,
    pub n: usize,
    pub mean_deviation: f64,
    pub max_deviation: f64,
    pub median_ks: f64,
}

/// Mean `|R_k - C_k(N) int f|` and median KS distance per rung.
pub fn run_convergence_ladder(cfg: &ExperimentConfig) -> Result<Vec<LadderRow>> {
    cfg.check_budget(Work::Correlation)?;
    let pairs = for_each_sample(cfg, |ctx| Ok((correlation_rows(ctx, cfg)?, gap_row(ctx, &cfg.sequence)?)))?;
    let (corr, gaps): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let corr: Vec<CorrelationRow> = corr.into_iter().flatten().collect();
    let summary = summarize_gaps(&gaps);
    let mut out = Vec::new();
    for s in &summary {
        for &k in &cfg.k_list {
            let devs: Vec<f64> = corr.iter().filter(|r| r.n == s.n && r.k == k).map(|r| r.deviation).collect();
            out.push(LadderRow {
                k,
                n: s.n,
                mean_deviation: devs.iter().sum::<f64>() / devs.len() as f64,
                max_deviation: devs.iter().cloned().fold(0.0, f64::max),
                median_ks: s.median_ks,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub checked: usize,
    /// Largest circular distance between a point and its recomputation.
    pub max_deviation: f64,
}

/// Recomputes about `fraction` of the points (at least one, always the
/// last) at `2x` fraction bits by the independent exact-power route.
pub fn spot_check(ctx: &SampleContext<'_>, fraction: f64) -> Result<SpotCheck> {
    let n = ctx.sample.len();
    let stride = ((1.0 / fraction).round() as usize).max(1);
    let mut idx: Vec<usize> = (1..=n).step_by(stride).collect();
    if idx.last() != Some(&n) {
        idx.push(n);
    }
    let bits = 2 * ctx.sequence.frac_bits();
    let mut max_dev = 0u128;
    for &i in &idx {
        let p = ctx.sequence.recompute_point(i, &ctx.alpha, bits)?;
        let d = ctx.sample.fractions()[i - 1].wrapping_sub(p);
        max_dev = max_dev.max(d.min(d.wrapping_neg()));
    }
    Ok(SpotCheck {
        checked: idx.len(),
        max_deviation: max_dev as f64 * 2f64.powi(-128),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::new(LacunarySpec::geometric_decimal("1.5", "1").unwrap(), vec![64, 128, 256], 8, 7)
    }

    #[test]
    fn alpha_draws_are_reproducible_and_in_range() {
        let law = AlphaLaw::Uniform { lo: 1.0, hi: 2.0 };
        let a = law.sample(1, 100, 5);
        assert_eq!(a, law.sample(1, 100, 5));
        assert_ne!(a, law.sample(1, 100, 6));
        assert_ne!(a, law.sample(1, 101, 5));
        assert_ne!(a, law.sample(2, 100, 5));
        for i in 0..100 {
            assert!((1.0..2.0).contains(&law.sample(3, 10, i)));
        }
    }

    #[test]
    fn weighted_window_shape() {
        let law = AlphaLaw::Weighted {
            lo: 1.0,
            hi: 2.0,
            margin: 0.5,
        };
        assert_eq!(law.weight(1.5), 1.0);
        assert_eq!(law.weight(2.6), 0.0);
        let w = law.weight(2.25);
        assert!(w > 0.0 && w < 1.0);
        assert_eq!(law.support(), (0.5, 2.5));
    }

    #[test]
    fn correlation_experiment_is_deterministic() {
        let c = cfg();
        assert_eq!(run_correlation_experiment(&c).unwrap(), run_correlation_experiment(&c).unwrap());
    }

    #[test]
    fn scaling_f_doubles_everything() {
        let c = cfg();
        let mut d = cfg();
        d.test_function.scale = 2.0;
        let a = run_correlation_experiment(&c).unwrap();
        let b = run_correlation_experiment(&d).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(2.0 * x.value, y.value);
            assert_eq!(2.0 * x.reference, y.reference);
        }
    }

    #[test]
    fn budget_is_checked_before_running() {
        let mut c = cfg();
        c.budget_seconds = Some(1e-9);
        assert!(matches!(run_correlation_experiment(&c), Err(Error::BudgetExceeded { .. })));
        assert!(matches!(run_gap_experiment(&c), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn constant_statistic_gives_zero_variance() {
        let c = cfg();
        let rows = variance_table_with(&c, &|ctx, k, tf| Ok(c_k_factor(k, ctx.n)? * tf.integral())).unwrap();
        assert!(rows.iter().all(|r| r.variance == 0.0 && r.standard_error == 0.0));
        assert!(matches!(fit_variance_slope(&rows, 2), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn centering_identity() {
        let vals: Vec<WeightedValue> = (0..20)
            .map(|i| WeightedValue {
                weight: 0.5 + (i % 3) as f64 * 0.25,
                value: 0.9 + 0.01 * i as f64,
            })
            .collect();
        let (a, b, s) = (0.99, 1.0, 1.5);
        let (va, _) = variance_about(&vals, a, s);
        let (vb, _) = variance_about(&vals, b, s);
        let n = vals.len() as f64;
        let mean_rho_r = vals.iter().map(|v| v.weight * v.value).sum::<f64>() / n;
        let mean_rho = vals.iter().map(|v| v.weight).sum::<f64>() / n;
        let predicted = s * (a - b) * (2.0 * mean_rho_r - (a + b) * mean_rho);
        assert!((vb - va - predicted).abs() < 1e-13);
    }

    #[test]
    fn degenerate_clustering_is_flagged() {
        let spec = LacunarySpec::geometric_decimal("2", "1").unwrap();
        assert!(expected_degenerate(&spec, &Dilation::parse("1").unwrap(), 50));
        assert!(expected_degenerate(&spec, &Dilation::parse("0.25").unwrap(), 50));
        assert!(!expected_degenerate(&spec, &Dilation::parse("sqrt2").unwrap(), 50));
        let s = crate::sequences::fractional_parts(&spec, &Dilation::parse("1").unwrap(), 50, PrecisionBudget::default())
            .unwrap();
        let g = gap_profile(&s).unwrap();
        assert!(g.ks_distance > 0.97);
    }
}
