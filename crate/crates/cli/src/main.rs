//! `lacunary`: command-line front end.
//!
//! Exit codes: 0 success, 1 a run or assertion failed, 2 usage or config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use lacunary_core::config::{CountFamily, CountSection, RunConfig};
use lacunary_core::counting::{
    count_main_lemma, count_quadruples, count_region, fit_exponent, CountResult, MainLemmaInstance, MainLemmaMode,
    QuadrupleInstance, RegionInstance,
};
use lacunary_core::experiments::{
    for_each_sample, run_convergence_ladder, run_correlation_experiment, run_gap_experiment, run_variance_ladder, ExperimentConfig,
};
use lacunary_core::report::{distinct, fmt_f64, gnuplot_script, plot_projection, OutputDir, RunManifest, Table};
use lacunary_core::sequences::{fraction_to_f64, materialize, Dilation};
use lacunary_core::statistics::{c_k_factor, correlation_direct, correlation_naive, correlation_poisson_k2, gap_profile};
use lacunary_core::verify::{run_verify, VerifyOptions};
use lacunary_core::Error;

#[derive(Parser, Debug)]
#[command(name = "lacunary", version, about = "Fine-scale statistics of lacunary sequences modulo one")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Guaranteed fractional bits of every torus point.
    #[arg(long, global = true)]
    precision_bits: Option<u32>,
    /// Refuse experiments predicted to take longer than this.
    #[arg(long, global = true)]
    budget_seconds: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sequence values a_1..a_N.
    Materialize,
    /// Fractional parts {alpha a_n}.
    Fracparts,
    /// Nearest-neighbour gap statistics over the N ladder.
    Gaps,
    /// k-point correlations of one sample, or of every experiment sample.
    Correlate,
    /// Variance of R_k about its centering, with fitted decay slopes.
    Variance,
    /// Brute-force lattice counts.
    Count {
        /// Fit a growth exponent over the configured sizes.
        #[arg(long)]
        ladder: bool,
    },
    /// Convergence of R_k and gap statistics along the N ladder.
    Ladder,
    /// The acceptance suite.
    Verify {
        /// Reduced instance sizes.
        #[arg(long)]
        quick: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Materialize => "materialize",
            Command::Fracparts => "fracparts",
            Command::Gaps => "gaps",
            Command::Correlate => "correlate",
            Command::Variance => "variance",
            Command::Count { .. } => "count",
            Command::Ladder => "ladder",
            Command::Verify { .. } => "verify",
        }
    }
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidInput(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(b) = common.precision_bits {
        cfg.precision.fraction_bits = b;
    }
    if let Some(b) = common.budget_seconds {
        cfg.budget_seconds = Some(b);
    }
    Ok(cfg)
}

fn write_plot(
    out: &mut OutputDir,
    stem: &str,
    table: &Table,
    (x, y): (&str, &str),
    series: Option<&str>,
    logscale: bool,
) -> Result<(), Failure> {
    let plot = plot_projection(table, x, y, series, y)?;
    let names = distinct(&plot, "series");
    out.write_table(&format!("{stem}_plot.csv"), &plot)?;
    out.write_text(
        &format!("{stem}_plot.gp"),
        &gnuplot_script(&format!("{stem}_plot.csv"), &format!("{y} vs {x}"), &names, logscale),
    )?;
    Ok(())
}

fn cmd_materialize(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let spec = cfg.sequence()?;
    let n = cfg.sample()?.n;
    let seq = materialize(&spec, n, cfg.precision.budget())?;
    let mut t = Table::new(&["n", "value", "log2_value", "log2_radius", "fraction_bits"]);
    for (i, b) in seq.values().iter().enumerate() {
        t.push(vec![
            (i + 1).to_string(),
            fmt_f64(b.to_f64()),
            fmt_f64(b.value_log2()),
            fmt_f64(b.radius_log2()),
            b.frac_bits().to_string(),
        ]);
    }
    out.write_table("values.csv", &t)?;
    Ok(true)
}

fn cmd_fracparts(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let spec = cfg.sequence()?;
    let s = cfg.sample()?;
    let alpha = Dilation::parse(&s.alpha)?;
    let budget = cfg.precision.budget().with_alpha_upper(alpha.to_f64());
    let sample = materialize(&spec, s.n, budget)?.fractional_parts(&alpha, s.n)?;
    let mut t = Table::new(&["n", "point", "fraction_hex"]);
    for (i, &p) in sample.fractions().iter().enumerate() {
        t.push(vec![(i + 1).to_string(), fmt_f64(fraction_to_f64(p)), format!("{p:032x}")]);
    }
    out.write_table("fracparts.csv", &t)?;
    Ok(true)
}

/// R_k over every seeded sample of an experiment.
fn cmd_correlate_experiment(exp: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    let rows = run_correlation_experiment(exp)?;
    let mut t = Table::new(&["k", "n", "sample", "alpha", "value", "reference", "deviation"]);
    for r in &rows {
        t.push(vec![
            r.k.to_string(),
            r.n.to_string(),
            r.sample.to_string(),
            fmt_f64(r.alpha),
            fmt_f64(r.value),
            fmt_f64(r.reference),
            fmt_f64(r.deviation),
        ]);
    }
    out.write_table("correlate.csv", &t)?;
    Ok(true)
}

fn cmd_correlate(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    if cfg.sample.is_none() && cfg.experiment.is_some() {
        return cmd_correlate_experiment(&cfg.experiment()?, out);
    }
    let spec = cfg.sequence()?;
    let s = cfg.sample()?;
    let alpha = Dilation::parse(&s.alpha)?;
    let budget = cfg.precision.budget().with_alpha_upper(alpha.to_f64());
    let sample = materialize(&spec, s.n, budget)?.fractional_parts(&alpha, s.n)?;
    let tfs = cfg.test_function_spec();
    let mut t = Table::new(&["k", "n", "alpha", "test_function", "method", "value", "tail_bound", "reference"]);
    for &k in &s.k {
        let tf = tfs.build(k)?;
        let reference = c_k_factor(k, s.n)? * tf.integral();
        for m in &s.methods {
            let est = match m.as_str() {
                "direct" => correlation_direct(&sample, k, &tf)?,
                "naive" => correlation_naive(&sample, k, &tf)?,
                "poisson" if k == 2 => correlation_poisson_k2(&sample, &tf, s.truncation_factor * s.n as u64)?,
                "poisson" => return Err(Failure::Usage("the poisson method is only available for k = 2".into())),
                other => return Err(Failure::Usage(format!("unknown method `{other}`"))),
            };
            t.push(vec![
                k.to_string(),
                s.n.to_string(),
                alpha.to_string(),
                est.test_function.clone(),
                est.method.name().to_string(),
                fmt_f64(est.value),
                fmt_f64(est.method.tail_bound()),
                fmt_f64(reference),
            ]);
        }
    }
    out.write_table("correlate.csv", &t)?;
    Ok(true)
}

const HIST_BINS: usize = 40;
const HIST_MAX: f64 = 4.0;

fn cmd_gaps(exp: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    let (rows, summary) = run_gap_experiment(exp)?;
    let mut t = Table::new(&["n", "sample", "alpha", "ks_distance", "expected_degenerate"]);
    for r in &rows {
        t.push(vec![
            r.n.to_string(),
            r.sample.to_string(),
            fmt_f64(r.alpha),
            fmt_f64(r.ks_distance),
            r.expected_degenerate.to_string(),
        ]);
    }
    out.write_table("gaps.csv", &t)?;
    let mut s = Table::new(&["n", "samples", "mean_ks", "median_ks", "max_ks"]);
    for r in &summary {
        s.push(vec![
            r.n.to_string(),
            r.samples.to_string(),
            fmt_f64(r.mean_ks),
            fmt_f64(r.median_ks),
            fmt_f64(r.max_ks),
        ]);
    }
    write_plot(out, "gaps", &s, ("n", "median_ks"), None, true)?;
    // Gap histograms pooled over the samples of each rung.
    let hists = for_each_sample(exp, |ctx| Ok(gap_profile(&ctx.sample)?.histogram(HIST_BINS, HIST_MAX)))?;
    let mut pooled: Vec<Value> = Vec::new();
    for (i, &n) in exp.n_ladder.iter().enumerate() {
        let block = &hists[i * exp.samples_per_n..(i + 1) * exp.samples_per_n];
        let mut counts = vec![0u64; block[0].counts.len()];
        for h in block {
            for (c, v) in counts.iter_mut().zip(&h.counts) {
                *c += v;
            }
        }
        pooled.push(json!({ "n": n, "edges": block[0].edges, "counts": counts }));
    }
    out.write_json("summary.json", &json!({ "rungs": summary, "histograms": pooled }))?;
    Ok(true)
}

fn cmd_variance(exp: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    let rep = run_variance_ladder(exp)?;
    let mut t = Table::new(&["k", "n", "samples", "mean_rk", "variance", "standard_error"]);
    for r in &rep.rows {
        t.push(vec![
            r.k.to_string(),
            r.n.to_string(),
            r.num_samples.to_string(),
            fmt_f64(r.mean_rk),
            fmt_f64(r.variance),
            fmt_f64(r.standard_error),
        ]);
    }
    out.write_table("variance.csv", &t)?;
    write_plot(out, "variance", &t, ("n", "variance"), Some("k"), true)?;
    let ceiling = -1.0 + exp.eta_slack;
    let checks: Vec<Value> = rep
        .slopes
        .iter()
        .map(|s| {
            json!({
                "k": s.k,
                "slope": s.slope,
                "standard_error": s.standard_error,
                "ceiling": ceiling,
                "passed": s.slope <= ceiling,
            })
        })
        .collect();
    let passed = rep.slopes.iter().all(|s| s.slope <= ceiling);
    out.write_json(
        "summary.json",
        &json!({ "eta_slack": exp.eta_slack, "slopes": checks, "passed": passed }),
    )?;
    Ok(passed)
}

fn cmd_ladder(exp: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    let rows = run_convergence_ladder(exp)?;
    let mut t = Table::new(&["k", "n", "mean_deviation", "max_deviation", "median_ks"]);
    for r in &rows {
        t.push(vec![
            r.k.to_string(),
            r.n.to_string(),
            fmt_f64(r.mean_deviation),
            fmt_f64(r.max_deviation),
            fmt_f64(r.median_ks),
        ]);
    }
    out.write_table("ladder.csv", &t)?;
    write_plot(out, "ladder", &t, ("n", "mean_deviation"), Some("k"), true)?;
    Ok(true)
}

fn count_one(cfg: &RunConfig, c: &CountSection, size: i64) -> Result<CountResult, Failure> {
    Ok(match c.family {
        CountFamily::Region => {
            let mut inst = RegionInstance::new(&c.amplitudes, c.shift, c.c, size)?;
            if let Some(d) = c.constraint {
                inst = inst.with_constraint(d);
            }
            count_region(&inst)?
        }
        CountFamily::MainLemma => {
            let mode = if c.nondegenerate {
                MainLemmaMode::Nondegenerate
            } else {
                MainLemmaMode::DistinctZNonzeroY
            };
            count_main_lemma(&MainLemmaInstance::new(c.order, size, c.k, mode, &cfg.sequence()?)?)?
        }
        CountFamily::Quadruple => {
            let n = usize::try_from(size).map_err(|_| Failure::Usage("N must be positive".into()))?;
            count_quadruples(&QuadrupleInstance::new(c.order, n, c.epsilon, &cfg.sequence()?)?)?
        }
    })
}

fn cmd_count(cfg: &RunConfig, ladder: bool, out: &mut OutputDir, timings: &mut Vec<Value>) -> Outcome {
    let c = cfg.count()?;
    let mut t = Table::new(&["family", "r_or_k", "m_or_n", "k_or_eps", "count", "boundary_ambiguous"]);
    let mut pts = Vec::new();
    let mut ambiguous = 0;
    for &size in &c.sizes {
        let start = Instant::now();
        let r = count_one(cfg, c, size)?;
        timings.push(json!({ "m_or_n": size, "seconds": start.elapsed().as_secs_f64() }));
        ambiguous += r.boundary_ambiguous;
        pts.push((size as f64, r.count as f64));
        t.push(vec![
            r.family().to_string(),
            r.r_or_k().to_string(),
            r.m_or_n().to_string(),
            fmt_f64(r.k_or_eps()),
            r.count.to_string(),
            r.boundary_ambiguous.to_string(),
        ]);
    }
    if ladder {
        let fit = fit_exponent(&pts)?;
        t.push(vec![
            "slope".into(),
            String::new(),
            String::new(),
            String::new(),
            fmt_f64(fit.slope),
            ambiguous.to_string(),
        ]);
    }
    out.write_table("counts.csv", &t)?;
    if ambiguous > 0 {
        eprintln!("{}", Error::BoundaryAmbiguous { count: ambiguous });
    }
    Ok(ambiguous == 0)
}

fn cmd_verify(cfg: &RunConfig, quick: bool, out: &mut OutputDir, timings: &mut Vec<Value>) -> Outcome {
    let opts = VerifyOptions {
        quick,
        seed: cfg.seed,
        thresholds: cfg.verify.clone(),
    };
    let report = run_verify(&opts, &mut |c, secs| {
        println!("{}", c.line());
        timings.push(json!({ "criterion": c.id, "seconds": secs }));
    });
    for c in &report.criteria {
        if !c.table.is_empty() {
            out.write_table(&format!("criterion_{:02}.csv", c.id), &c.table)?;
        }
    }
    out.write_json("verify.json", &report)?;
    Ok(report.passed)
}

fn run(cli: &Cli, out_root: &Path) -> Outcome {
    let cfg = load_config(&cli.common)?;
    let hash = cfg.hash()?;
    let params = json!({
        "config": serde_json::to_value(&cfg).map_err(Error::from)?,
        "command": format!("{:?}", cli.command),
    });
    let manifest = RunManifest::new(cli.command.name(), cfg.seed, hash, params);
    let mut out = OutputDir::create(out_root, manifest)?;
    let start = Instant::now();
    let mut timings = Vec::new();
    let experiment = || -> Result<ExperimentConfig, Failure> { Ok(cfg.experiment()?) };
    let passed = match &cli.command {
        Command::Materialize => cmd_materialize(&cfg, &mut out)?,
        Command::Fracparts => cmd_fracparts(&cfg, &mut out)?,
        Command::Correlate => cmd_correlate(&cfg, &mut out)?,
        Command::Gaps => cmd_gaps(&experiment()?, &mut out)?,
        Command::Variance => cmd_variance(&experiment()?, &mut out)?,
        Command::Ladder => cmd_ladder(&experiment()?, &mut out)?,
        Command::Count { ladder } => cmd_count(&cfg, *ladder, &mut out, &mut timings)?,
        Command::Verify { quick } => cmd_verify(&cfg, *quick, &mut out, &mut timings)?,
    };
    out.finish(&json!({
        "total_seconds": start.elapsed().as_secs_f64(),
        "steps": timings,
    }))?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli, &cli.common.out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: an assertion failed; see {}", cli.command.name(), cli.common.out.display());
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
