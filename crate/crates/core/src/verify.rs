//! The acceptance suite: ten pass/fail criteria with declared thresholds.

use std::collections::BTreeMap;
use std::time::Instant;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::counting::{
    count_main_lemma, count_quadruples, fit_exponent, MainLemmaInstance, MainLemmaMode, QuadrupleInstance,
};
use crate::decimal;
use crate::error::{Error, Result};
use crate::experiments::{
    fit_variance_slope, for_each_sample, spot_check, variance_table, AlphaLaw, ExperimentConfig, TestFunctionSpec,
};
use crate::report::{fmt_f64, Table};
use crate::sequences::{interval_count, materialize, Dilation, LacunarySpec, PrecisionBudget};
use crate::statistics::{
    c_k_factor, correlation_direct, correlation_naive, correlation_poisson_k2, gap_profile,
};
use crate::testfn::{FamilyKind, TestFunction};

/// Declared slack constants. All are artifact-level choices, overridable
/// from the `[verify]` config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub oracle_relative: f64,
    pub poisson_absolute: f64,
    pub r2_mean: f64,
    pub r3_mean: f64,
    pub ks_mean: f64,
    pub ks_max: f64,
    pub eta_slack: f64,
    pub seed_sigmas: f64,
    pub main_lemma_slack: f64,
    pub quadruple_slack: f64,
    pub precision_bits: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            oracle_relative: 1e-9,
            poisson_absolute: 1e-6,
            r2_mean: 0.05,
            r3_mean: 0.1,
            ks_mean: 0.02,
            ks_max: 0.05,
            eta_slack: 0.3,
            seed_sigmas: 3.0,
            main_lemma_slack: 0.5,
            quadruple_slack: 0.5,
            precision_bits: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub quick: bool,
    pub seed: u64,
    pub thresholds: Thresholds,
}

/// Seed used when none is configured.
pub const DEFAULT_SEED: u64 = 20_240_601;

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            quick: false,
            seed: DEFAULT_SEED,
            thresholds: Thresholds::default(),
        }
    }
}

/// Instance sizes of each criterion; `quick` shrinks the expensive ones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sizes {
    pub oracle_instances: usize,
    pub oracle_max_n: usize,
    pub poisson_instances: usize,
    pub poisson_max_n: usize,
    pub limit_n: usize,
    pub limit_alphas: usize,
    pub variance_ladder: Vec<usize>,
    pub variance_samples: usize,
    pub intervals: usize,
    pub main_lemma_ms: Vec<i64>,
    pub quadruple_ns: Vec<usize>,
    pub spot_fraction: f64,
}

impl Sizes {
    pub fn for_mode(quick: bool) -> Self {
        if quick {
            Sizes {
                oracle_instances: 12,
                oracle_max_n: 120,
                poisson_instances: 6,
                poisson_max_n: 500,
                limit_n: 5000,
                limit_alphas: 10,
                variance_ladder: vec![256, 512, 1024, 2048],
                variance_samples: 60,
                intervals: 200,
                main_lemma_ms: vec![4, 8, 16, 32],
                quadruple_ns: vec![6, 8, 12, 16],
                spot_fraction: 0.01,
            }
        } else {
            Sizes {
                oracle_instances: 50,
                oracle_max_n: 300,
                poisson_instances: 20,
                poisson_max_n: 2000,
                limit_n: 20_000,
                limit_alphas: 10,
                variance_ladder: vec![512, 1024, 2048, 4096],
                variance_samples: 200,
                intervals: 1000,
                main_lemma_ms: vec![4, 8, 16, 32],
                quadruple_ns: vec![8, 12, 16, 24],
                spot_fraction: 0.01,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: BTreeMap<String, Value>,
    pub thresholds: BTreeMap<String, Value>,
    pub error: Option<String>,
    #[serde(skip)]
    pub table: Table,
}

impl CriterionOutcome {
    fn new(id: u32, name: &str) -> Self {
        CriterionOutcome {
            id,
            name: name.to_string(),
            passed: false,
            measured: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            error: None,
            table: Table::default(),
        }
    }

    fn measure(&mut self, key: &str, v: impl Serialize) {
        self.measured.insert(key.to_string(), json!(v));
    }

    fn threshold(&mut self, key: &str, v: impl Serialize) {
        self.thresholds.insert(key.to_string(), json!(v));
    }

    /// One summary line: `criterion N [PASS|FAIL] name: key=value ...`.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let measured: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let mut s = format!("criterion {:>2} [{status}] {}: {}", self.id, self.name, measured.join(" "));
        if let Some(e) = &self.error {
            s.push_str(&format!(" error={e}"));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub quick: bool,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub criteria: Vec<CriterionOutcome>,
    pub passed: bool,
}

impl VerifyReport {
    /// Serialized JSON plus every criterion table as CSV, concatenated; the
    /// byte string compared by the determinism check.
    pub fn fingerprint(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        for c in &self.criteria {
            s.push_str(&c.table.to_csv_string(None)?);
        }
        Ok(s)
    }
}

pub const CRITERION_NAMES: [&str; 10] = [
    "oracle equivalence of direct and naive correlations",
    "dual-sum identity for the pair correlation",
    "correlation limits at large N",
    "spacing law",
    "variance decay",
    "interval count bound",
    "main lemma exponent",
    "quadruple exponent",
    "precision soundness",
    "determinism",
];

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn three_halves() -> LacunarySpec {
    LacunarySpec::geometric_decimal("1.5", "1").expect("valid sequence")
}

fn finish(mut out: CriterionOutcome, result: Result<bool>) -> CriterionOutcome {
    match result {
        Ok(p) => out.passed = p,
        Err(e) => {
            out.passed = false;
            out.error = Some(e.to_string());
        }
    }
    out
}

pub fn criterion_oracle(opts: &VerifyOptions, sizes: &Sizes) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(1, CRITERION_NAMES[0]);
    let tol = opts.thresholds.oracle_relative;
    out.threshold("relative_error", tol);
    let res = (|| {
        let mut r = rng(opts.seed, 101);
        let seq = materialize(&three_halves(), sizes.oracle_max_n, PrecisionBudget::default().with_alpha_upper(2.0))?;
        let mut table = Table::new(&["instance", "k", "family", "n", "support", "alpha", "direct", "naive", "relative_error"]);
        let mut worst: f64 = 0.0;
        for i in 0..sizes.oracle_instances {
            let k = 2 + i % 2;
            let n = r.gen_range(20..=sizes.oracle_max_n);
            let l: f64 = r.gen_range(0.5..3.0);
            let alpha = Dilation::from_f64(r.gen_range(1.0..2.0))?;
            let tf = if (i / 2) % 2 == 0 {
                let iv: Vec<(f64, f64)> = (0..k - 1)
                    .map(|_| (-l * r.gen_range(0.2..1.0), l * r.gen_range(0.2..1.0)))
                    .collect();
                TestFunction::boxed(iv)?
            } else {
                TestFunction::triangle(k - 1, l)?
            };
            let sample = seq.fractional_parts(&alpha, n)?;
            let d = correlation_direct(&sample, k, &tf)?.value;
            let nv = correlation_naive(&sample, k, &tf)?.value;
            let rel = if nv == d { 0.0 } else { (d - nv).abs() / nv.abs() };
            worst = worst.max(rel);
            table.push(vec![
                i.to_string(),
                k.to_string(),
                tf.kind().to_string(),
                n.to_string(),
                fmt_f64(tf.support_radius()),
                fmt_f64(alpha.to_f64()),
                fmt_f64(d),
                fmt_f64(nv),
                fmt_f64(rel),
            ]);
        }
        out.measure("instances", sizes.oracle_instances);
        out.measure("max_relative_error", worst);
        out.table = table;
        Ok(worst <= tol)
    })();
    finish(out, res)
}

pub fn criterion_poisson(opts: &VerifyOptions, sizes: &Sizes) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(2, CRITERION_NAMES[1]);
    let slack = opts.thresholds.poisson_absolute;
    out.threshold("absolute_slack_over_tail", slack);
    let res = (|| {
        let mut r = rng(opts.seed, 102);
        let seq = materialize(&three_halves(), sizes.poisson_max_n, PrecisionBudget::default().with_alpha_upper(2.0))?;
        let mut table = Table::new(&["instance", "n", "support", "alpha", "truncation", "direct", "poisson", "difference", "tail_bound"]);
        let mut ok = true;
        let mut worst: f64 = 0.0;
        let mut worst_excess = f64::NEG_INFINITY;
        for i in 0..sizes.poisson_instances {
            let n = r.gen_range(200..=sizes.poisson_max_n);
            let l: f64 = r.gen_range(0.5..2.0);
            let alpha = Dilation::from_f64(r.gen_range(1.0..2.0))?;
            let tf = TestFunction::triangle(1, l)?;
            let t = 50 * n as u64;
            let sample = seq.fractional_parts(&alpha, n)?;
            let d = correlation_direct(&sample, 2, &tf)?.value;
            let p = correlation_poisson_k2(&sample, &tf, t)?;
            let diff = (p.value - d).abs();
            let tail = p.method.tail_bound();
            ok &= diff <= tail + slack;
            worst = worst.max(diff);
            worst_excess = worst_excess.max(diff - tail);
            table.push(vec![
                i.to_string(),
                n.to_string(),
                fmt_f64(l),
                fmt_f64(alpha.to_f64()),
                t.to_string(),
                fmt_f64(d),
                fmt_f64(p.value),
                fmt_f64(diff),
                fmt_f64(tail),
            ]);
        }
        out.measure("instances", sizes.poisson_instances);
        out.measure("max_difference", worst);
        out.measure("max_difference_minus_tail", worst_excess);
        out.table = table;
        Ok(ok)
    })();
    finish(out, res)
}

/// Per-sample values shared by the limit, spacing and precision criteria.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitSample {
    pub alpha: f64,
    pub r2: f64,
    pub r3: f64,
    pub ks: f64,
    pub spot_checked: usize,
    pub spot_deviation: f64,
}

fn limit_config(opts: &VerifyOptions, sizes: &Sizes) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(three_halves(), vec![sizes.limit_n], sizes.limit_alphas, opts.seed);
    cfg.k_list = vec![2, 3];
    cfg.alpha_law = AlphaLaw::Uniform { lo: 1.0, hi: 2.0 };
    cfg.samples_per_n = sizes.limit_alphas.max(2);
    cfg
}

pub fn limit_samples(opts: &VerifyOptions, sizes: &Sizes) -> Result<Vec<LimitSample>> {
    let cfg = limit_config(opts, sizes);
    let f2 = TestFunction::triangle(1, 1.0)?;
    let f3 = TestFunction::triangle(2, 1.0)?;
    for_each_sample(&cfg, |ctx| {
        let spot = spot_check(ctx, sizes.spot_fraction)?;
        Ok(LimitSample {
            alpha: ctx.alpha.to_f64(),
            r2: correlation_direct(&ctx.sample, 2, &f2)?.value,
            r3: correlation_direct(&ctx.sample, 3, &f3)?.value,
            ks: gap_profile(&ctx.sample)?.ks_distance,
            spot_checked: spot.checked,
            spot_deviation: spot.max_deviation,
        })
    })
}

pub fn criterion_limits(opts: &VerifyOptions, sizes: &Sizes, samples: &Result<Vec<LimitSample>>) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(3, CRITERION_NAMES[2]);
    let th = &opts.thresholds;
    out.threshold("mean_abs_r2_deviation", th.r2_mean);
    out.threshold("mean_abs_r3_deviation", th.r3_mean);
    let res = (|| {
        let samples = samples.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?;
        let n = sizes.limit_n;
        let c2 = c_k_factor(2, n)?;
        let c3 = c_k_factor(3, n)?;
        let mut table = Table::new(&["n", "alpha", "r2", "r2_reference", "r3", "r3_reference"]);
        for s in samples {
            table.push(vec![n.to_string(), fmt_f64(s.alpha), fmt_f64(s.r2), fmt_f64(c2), fmt_f64(s.r3), fmt_f64(c3)]);
        }
        let m = samples.len() as f64;
        let d2 = samples.iter().map(|s| (s.r2 - c2).abs()).sum::<f64>() / m;
        let d3 = samples.iter().map(|s| (s.r3 - c3).abs()).sum::<f64>() / m;
        out.measure("n", n);
        out.measure("alphas", samples.len());
        out.measure("mean_abs_r2_deviation", d2);
        out.measure("mean_abs_r3_deviation", d3);
        out.table = table;
        Ok(d2 < th.r2_mean && d3 < th.r3_mean)
    })();
    finish(out, res)
}

pub fn criterion_spacing(opts: &VerifyOptions, sizes: &Sizes, samples: &Result<Vec<LimitSample>>) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(4, CRITERION_NAMES[3]);
    let th = &opts.thresholds;
    out.threshold("mean_ks", th.ks_mean);
    out.threshold("max_ks", th.ks_max);
    let res = (|| {
        let samples = samples.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut table = Table::new(&["n", "alpha", "ks_distance"]);
        for s in samples {
            table.push(vec![sizes.limit_n.to_string(), fmt_f64(s.alpha), fmt_f64(s.ks)]);
        }
        let mean = samples.iter().map(|s| s.ks).sum::<f64>() / samples.len() as f64;
        let max = samples.iter().map(|s| s.ks).fold(0.0, f64::max);
        out.measure("mean_ks", mean);
        out.measure("max_ks", max);
        out.table = table;
        Ok(mean < th.ks_mean && max < th.ks_max)
    })();
    finish(out, res)
}

fn variance_config(opts: &VerifyOptions, sizes: &Sizes, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(three_halves(), sizes.variance_ladder.clone(), sizes.variance_samples, seed);
    cfg.k_list = vec![2];
    cfg.test_function = TestFunctionSpec {
        family: FamilyKind::Triangle,
        support_radius: 1.0,
        scale: 1.0,
    };
    cfg.eta_slack = opts.thresholds.eta_slack;
    cfg
}

/// The two seeds used by the variance criterion.
pub fn variance_seeds(seed: u64) -> [u64; 2] {
    [seed, seed ^ 0x9E37_79B9_7F4A_7C15]
}

pub fn criterion_variance(opts: &VerifyOptions, sizes: &Sizes) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(5, CRITERION_NAMES[4]);
    let th = &opts.thresholds;
    let ceiling = -1.0 + th.eta_slack;
    out.threshold("slope_ceiling", ceiling);
    out.threshold("seed_sigmas", th.seed_sigmas);
    let res = (|| {
        let mut table = Table::new(&["seed", "n", "samples", "mean_r2", "variance", "standard_error"]);
        let mut slopes = Vec::new();
        for seed in variance_seeds(opts.seed) {
            let cfg = variance_config(opts, sizes, seed);
            let rows = variance_table(&cfg)?;
            for r in &rows {
                table.push(vec![
                    seed.to_string(),
                    r.n.to_string(),
                    r.num_samples.to_string(),
                    fmt_f64(r.mean_rk),
                    fmt_f64(r.variance),
                    fmt_f64(r.standard_error),
                ]);
            }
            slopes.push(fit_variance_slope(&rows, 2)?);
        }
        let (a, b) = (slopes[0], slopes[1]);
        let combined = (a.standard_error.powi(2) + b.standard_error.powi(2)).sqrt();
        let gap = (a.slope - b.slope).abs();
        out.measure("slope", a.slope);
        out.measure("slope_standard_error", a.standard_error);
        out.measure("second_seed_slope", b.slope);
        out.measure("second_seed_standard_error", b.standard_error);
        out.measure("seed_gap_in_sigmas", gap / combined);
        out.table = table;
        Ok(a.slope <= ceiling && gap <= th.seed_sigmas * combined)
    })();
    finish(out, res)
}

pub fn criterion_intervals(opts: &VerifyOptions, sizes: &Sizes) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(6, CRITERION_NAMES[5]);
    out.threshold("violations", 0);
    let res = (|| {
        let mut table = Table::new(&["ratio", "lo", "hi", "count", "bound"]);
        let mut violations = 0usize;
        let mut checked = 0usize;
        for (stream, base, n) in [(106u64, "2", 60usize), (107, "1.3", 150)] {
            let spec = LacunarySpec::geometric_decimal(base, "1")?;
            let seq = materialize(&spec, n, PrecisionBudget::default())?;
            let top = seq.value(n).to_f64();
            let first = seq.value(1).to_f64();
            let mut r = rng(opts.seed, stream);
            for i in 0..sizes.intervals {
                let (lo, hi) = if i % 10 == 0 {
                    // Degenerate and member-to-member intervals.
                    let j = r.gen_range(1..n);
                    let a = spec.exact_rational(j, 1 << 20).expect("rational base");
                    let b = if i % 20 == 0 { a.clone() } else { spec.exact_rational(j + 1, 1 << 20).expect("rational base") };
                    (a, b)
                } else {
                    let lo = (r.gen_range((first / 2.0).ln()..top.ln())).exp();
                    let width = lo * 10f64.powf(r.gen_range(-3.0..1.0));
                    let hi = (lo + width).min(top);
                    (decimal::rational_from_f64(lo)?, decimal::rational_from_f64(hi.max(lo))?)
                };
                let c = interval_count(&seq, &lo, &hi)?;
                checked += 1;
                if !c.bound_holds {
                    violations += 1;
                }
                let bound: BigRational = &c.constant * (&hi - &lo) + BigRational::from_integer(1.into());
                table.push(vec![
                    base.to_string(),
                    fmt_f64(decimal::to_f64(&lo)),
                    fmt_f64(decimal::to_f64(&hi)),
                    c.count.to_string(),
                    fmt_f64(decimal::to_f64(&bound)),
                ]);
            }
        }
        out.measure("intervals", checked);
        out.measure("violations", violations);
        out.table = table;
        Ok(violations == 0)
    })();
    finish(out, res)
}

pub fn criterion_main_lemma(opts: &VerifyOptions, sizes: &Sizes) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(7, CRITERION_NAMES[6]);
    let ceiling = 1.0 + opts.thresholds.main_lemma_slack;
    out.threshold("slope_ceiling", ceiling);
    out.threshold("boundary_ambiguous", 0);
    let res = (|| {
        let spec = LacunarySpec::geometric_decimal("2", "1")?;
        let mut table = Table::new(&["r", "m", "k", "count", "boundary_ambiguous"]);
        let mut pts = Vec::new();
        let mut ambiguous = 0;
        for &m in &sizes.main_lemma_ms {
            let c = count_main_lemma(&MainLemmaInstance::new(2, m, 2.0, MainLemmaMode::DistinctZNonzeroY, &spec)?)?;
            ambiguous += c.boundary_ambiguous;
            pts.push((m as f64, c.count as f64));
            table.push(vec!["2".into(), m.to_string(), "2".into(), c.count.to_string(), c.boundary_ambiguous.to_string()]);
        }
        let fit = fit_exponent(&pts)?;
        out.measure("slope", fit.slope);
        out.measure("boundary_ambiguous", ambiguous);
        out.table = table;
        Ok(fit.slope <= ceiling && ambiguous == 0)
    })();
    finish(out, res)
}

pub fn criterion_quadruples(opts: &VerifyOptions, sizes: &Sizes) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(8, CRITERION_NAMES[7]);
    let eps = 0.1;
    let k = 2.0;
    let ceiling = 2.0 * k - 1.0 + 4.0 * k * eps + opts.thresholds.quadruple_slack;
    out.threshold("slope_ceiling", ceiling);
    out.threshold("boundary_ambiguous", 0);
    let res = (|| {
        let spec = LacunarySpec::geometric_decimal("2", "1")?;
        let mut table = Table::new(&["k", "n", "epsilon", "count", "degenerate", "boundary_ambiguous"]);
        let mut pts = Vec::new();
        let mut ambiguous = 0;
        let mut violations = 0;
        for &n in &sizes.quadruple_ns {
            let c = count_quadruples(&QuadrupleInstance::new(2, n, eps, &spec)?)?;
            ambiguous += c.boundary_ambiguous;
            violations += c.pairing_violations.unwrap_or(0);
            pts.push((n as f64, c.count as f64));
            table.push(vec![
                "2".into(),
                n.to_string(),
                fmt_f64(eps),
                c.count.to_string(),
                c.degenerate.unwrap_or(0).to_string(),
                c.boundary_ambiguous.to_string(),
            ]);
        }
        let fit = fit_exponent(&pts)?;
        out.measure("slope", fit.slope);
        out.measure("boundary_ambiguous", ambiguous);
        out.measure("pairing_violations", violations);
        out.table = table;
        Ok(fit.slope <= ceiling && ambiguous == 0 && violations == 0)
    })();
    finish(out, res)
}

pub fn criterion_precision(
    opts: &VerifyOptions,
    sizes: &Sizes,
    samples: &Result<Vec<LimitSample>>,
) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(9, CRITERION_NAMES[8]);
    let limit = 2f64.powi(-(opts.thresholds.precision_bits as i32));
    out.threshold("max_deviation", limit);
    let res = (|| {
        let samples = samples.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut table = Table::new(&["source", "n", "alpha", "points_checked", "max_deviation"]);
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for s in samples {
            worst = worst.max(s.spot_deviation);
            checked += s.spot_checked;
            table.push(vec![
                "limits".into(),
                sizes.limit_n.to_string(),
                fmt_f64(s.alpha),
                s.spot_checked.to_string(),
                fmt_f64(s.spot_deviation),
            ]);
        }
        for seed in variance_seeds(opts.seed) {
            let cfg = variance_config(opts, sizes, seed);
            let rows = for_each_sample(&cfg, |ctx| Ok((ctx.n, ctx.alpha.to_f64(), spot_check(ctx, sizes.spot_fraction)?)))?;
            for (n, alpha, s) in rows {
                worst = worst.max(s.max_deviation);
                checked += s.checked;
                table.push(vec![
                    format!("variance:{seed}"),
                    n.to_string(),
                    fmt_f64(alpha),
                    s.checked.to_string(),
                    fmt_f64(s.max_deviation),
                ]);
            }
        }
        out.measure("points_checked", checked);
        out.measure("max_deviation", worst);
        out.table = table;
        Ok(worst <= limit)
    })();
    finish(out, res)
}

/// Runs criteria 1-9, calling `progress` after each one.
pub fn run_core(
    opts: &VerifyOptions,
    progress: &mut dyn FnMut(&CriterionOutcome, f64),
) -> Vec<CriterionOutcome> {
    let sizes = Sizes::for_mode(opts.quick);
    let mut out = Vec::new();
    let mut step = |c: CriterionOutcome, t: Instant, out: &mut Vec<CriterionOutcome>| {
        progress(&c, t.elapsed().as_secs_f64());
        out.push(c);
    };
    let t = Instant::now();
    step(criterion_oracle(opts, &sizes), t, &mut out);
    let t = Instant::now();
    step(criterion_poisson(opts, &sizes), t, &mut out);
    let t = Instant::now();
    let samples = limit_samples(opts, &sizes);
    step(criterion_limits(opts, &sizes, &samples), t, &mut out);
    let t = Instant::now();
    step(criterion_spacing(opts, &sizes, &samples), t, &mut out);
    let t = Instant::now();
    step(criterion_variance(opts, &sizes), t, &mut out);
    let t = Instant::now();
    step(criterion_intervals(opts, &sizes), t, &mut out);
    let t = Instant::now();
    step(criterion_main_lemma(opts, &sizes), t, &mut out);
    let t = Instant::now();
    step(criterion_quadruples(opts, &sizes), t, &mut out);
    let t = Instant::now();
    step(criterion_precision(opts, &sizes, &samples), t, &mut out);
    out
}

fn report(opts: &VerifyOptions, criteria: Vec<CriterionOutcome>) -> VerifyReport {
    let passed = criteria.iter().all(|c| c.passed);
    VerifyReport {
        quick: opts.quick,
        seed: opts.seed,
        thresholds: opts.thresholds.clone(),
        criteria,
        passed,
    }
}

/// Determinism: the quick suite run twice gives byte-identical output.
/// `first` is reused as one of the runs when it already is a quick run.
pub fn criterion_determinism(opts: &VerifyOptions, first: Option<&VerifyReport>) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(10, CRITERION_NAMES[9]);
    let res = (|| {
        let quick = VerifyOptions {
            quick: true,
            ..opts.clone()
        };
        let a = match first {
            Some(r) if r.quick => r.fingerprint()?,
            _ => report(&quick, run_core(&quick, &mut |_, _| {})).fingerprint()?,
        };
        let b = report(&quick, run_core(&quick, &mut |_, _| {})).fingerprint()?;
        out.measure("bytes", a.len());
        out.measure("identical", a == b);
        Ok(a == b)
    })();
    finish(out, res)
}

/// The full suite. `progress` receives each outcome and its wall time.
pub fn run_verify(opts: &VerifyOptions, progress: &mut dyn FnMut(&CriterionOutcome, f64)) -> VerifyReport {
    let criteria = run_core(opts, progress);
    let partial = report(opts, criteria);
    let t = Instant::now();
    let det = criterion_determinism(opts, Some(&partial));
    progress(&det, t.elapsed().as_secs_f64());
    let mut criteria = partial.criteria;
    criteria.push(det);
    report(opts, criteria)
}
