//! TOML run configuration. Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [sequence]
//! family = "geometric"      # geometric | integer_geometric | perturbed_geometric | explicit
//! base = "1.5"              # decimal literal or sqrt2 / e / pi / phi
//! scale = "1"
//!
//! [test_function]
//! family = "triangle"       # box | triangle | smooth_bump
//! support = 1.0
//!
//! [experiment]
//! k = [2, 3]
//! n_ladder = [512, 1024]
//! samples_per_n = 50
//! alpha = { law = "uniform", lo = 1.0, hi = 2.0 }
//! ```
//!
//! Relative file paths are resolved against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::decimal;
use crate::error::{Error, Result};
use crate::experiments::{AlphaLaw, ExperimentConfig, TestFunctionSpec};
use crate::report::config_hash;
use crate::sequences::{parse_value_lines, BaseValue, LacunarySpec, PrecisionBudget};
use crate::testfn::FamilyKind;
use crate::verify::{Thresholds, DEFAULT_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceFamily {
    Geometric,
    IntegerGeometric,
    PerturbedGeometric,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    pub family: SequenceFamily,
    /// Decimal literal or named constant.
    pub base: Option<String>,
    /// File holding a long decimal expansion of an irrational base.
    pub base_digits_file: Option<PathBuf>,
    #[serde(default = "one")]
    pub scale: String,
    /// Relative perturbations `t_j`, applied cyclically as `(1 + t_j)`.
    #[serde(default)]
    pub perturbations: Vec<String>,
    /// One decimal value per line.
    pub values_file: Option<PathBuf>,
    pub declared_ratio: Option<String>,
}

fn one() -> String {
    "1".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSection {
    pub family: FamilyKind,
    /// Half-width `L` of the support, in units of the mean spacing.
    pub support: f64,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for TestFunctionSection {
    fn default() -> Self {
        TestFunctionSection {
            family: FamilyKind::Triangle,
            support: 1.0,
            scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    pub n_ladder: Vec<usize>,
    pub samples_per_n: usize,
    #[serde(default = "default_alpha")]
    pub alpha: AlphaLaw,
    #[serde(default = "default_eta")]
    pub eta_slack: f64,
}

fn default_k() -> Vec<usize> {
    vec![2]
}

fn default_alpha() -> AlphaLaw {
    AlphaLaw::Uniform { lo: 1.0, hi: 2.0 }
}

fn default_eta() -> f64 {
    0.3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecisionSection {
    /// Fractional bits guaranteed correct in every torus point.
    pub fraction_bits: u32,
    pub guard_bits: u32,
    /// Largest total bit length of any single value.
    pub hard_cap_bits: u64,
}

impl Default for PrecisionSection {
    fn default() -> Self {
        let b = PrecisionBudget::default();
        PrecisionSection {
            fraction_bits: b.target_fraction_bits,
            guard_bits: b.guard_bits,
            hard_cap_bits: b.hard_cap_bits,
        }
    }
}

impl PrecisionSection {
    pub fn budget(&self) -> PrecisionBudget {
        PrecisionBudget {
            target_fraction_bits: self.fraction_bits,
            guard_bits: self.guard_bits,
            hard_cap_bits: self.hard_cap_bits,
            ..PrecisionBudget::default()
        }
    }
}

/// Inputs of `materialize`, `fracparts` and `correlate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub n: usize,
    /// Dilation, decimal literal or named constant.
    #[serde(default = "one")]
    pub alpha: String,
    /// Correlation orders for `correlate`.
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    /// Evaluation methods for `correlate`: direct, naive, poisson.
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    /// Truncation of the dual sum as a multiple of N.
    #[serde(default = "default_truncation")]
    pub truncation_factor: u64,
}

fn default_methods() -> Vec<String> {
    vec!["direct".into()]
}

fn default_truncation() -> u64 {
    50
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountFamily {
    Region,
    MainLemma,
    Quadruple,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountSection {
    pub family: CountFamily,
    /// `r` for region and main-lemma counts, `k` for quadruples.
    #[serde(default = "two")]
    pub order: usize,
    /// Range bound `M` (region, main lemma) or `N` (quadruple), one count per entry.
    pub sizes: Vec<i64>,
    /// `K` for the main lemma.
    #[serde(default = "two_f")]
    pub k: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub shift: f64,
    #[serde(default = "unit")]
    pub c: f64,
    pub constraint: Option<i64>,
    #[serde(default)]
    pub nondegenerate: bool,
}

fn two() -> usize {
    2
}

fn two_f() -> f64 {
    2.0
}

fn default_eps() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub budget_seconds: Option<f64>,
    pub sequence: Option<SequenceSection>,
    #[serde(default)]
    pub test_function: TestFunctionSection,
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub precision: PrecisionSection,
    pub sample: Option<SampleSection>,
    pub count: Option<CountSection>,
    #[serde(default)]
    pub verify: Thresholds,
    /// Directory relative file paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            budget_seconds: None,
            sequence: None,
            test_function: TestFunctionSection::default(),
            experiment: None,
            precision: PrecisionSection::default(),
            sample: None,
            count: None,
            verify: Thresholds::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_rational(field: &str, s: &str) -> Result<BigRational> {
    decimal::rational(s).map_err(|e| cfg_err(format!("{field}: {e}")))
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    fn read_file(&self, p: &Path) -> Result<String> {
        let full = if p.is_absolute() { p.to_path_buf() } else { self.base_dir.join(p) };
        fs::read_to_string(&full).map_err(|e| cfg_err(format!("{}: {e}", full.display())))
    }

    fn base(&self, s: &SequenceSection) -> Result<BaseValue> {
        match (&s.base, &s.base_digits_file) {
            (Some(_), Some(_)) => Err(cfg_err("give either sequence.base or sequence.base_digits_file, not both")),
            (None, None) => Err(cfg_err("sequence.base is required for this family")),
            (None, Some(f)) => BaseValue::digits(&self.read_file(f)?),
            (Some(b), None) => match b.trim().parse() {
                Ok(c) => Ok(BaseValue::Named(c)),
                Err(_) => Ok(BaseValue::Exact(parse_rational("sequence.base", b)?)),
            },
        }
    }

    pub fn sequence(&self) -> Result<LacunarySpec> {
        let s = self.sequence.as_ref().ok_or_else(|| cfg_err("missing [sequence] section"))?;
        let scale = parse_rational("sequence.scale", &s.scale)?;
        let spec = match s.family {
            SequenceFamily::Geometric => LacunarySpec::geometric(self.base(s)?, scale)?,
            SequenceFamily::IntegerGeometric => {
                let b = s.base.as_deref().ok_or_else(|| cfg_err("sequence.base is required"))?;
                let q: u64 = b.trim().parse().map_err(|_| cfg_err("integer_geometric needs an integer base"))?;
                LacunarySpec::integer_geometric(q, scale)?
            }
            SequenceFamily::PerturbedGeometric => {
                let t = s
                    .perturbations
                    .iter()
                    .map(|p| parse_rational("sequence.perturbations", p))
                    .collect::<Result<Vec<_>>>()?;
                LacunarySpec::perturbed_geometric(self.base(s)?, scale, t)?
            }
            SequenceFamily::Explicit => {
                let f = s.values_file.as_ref().ok_or_else(|| cfg_err("explicit sequences need sequence.values_file"))?;
                let values = parse_value_lines(&self.read_file(f)?)?;
                let declared = s
                    .declared_ratio
                    .as_ref()
                    .ok_or_else(|| cfg_err("explicit sequences need sequence.declared_ratio"))?;
                return LacunarySpec::explicit(values, parse_rational("sequence.declared_ratio", declared)?);
            }
        };
        match &s.declared_ratio {
            Some(d) => spec.with_declared_ratio(parse_rational("sequence.declared_ratio", d)?),
            None => Ok(spec),
        }
    }

    pub fn test_function_spec(&self) -> TestFunctionSpec {
        TestFunctionSpec {
            family: self.test_function.family,
            support_radius: self.test_function.support,
            scale: self.test_function.scale,
        }
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let e = self.experiment.as_ref().ok_or_else(|| cfg_err("missing [experiment] section"))?;
        let mut cfg = ExperimentConfig::new(self.sequence()?, e.n_ladder.clone(), e.samples_per_n, self.seed);
        cfg.k_list = e.k.clone();
        cfg.alpha_law = e.alpha;
        cfg.test_function = self.test_function_spec();
        cfg.eta_slack = e.eta_slack;
        cfg.precision = self.precision.budget();
        cfg.budget_seconds = self.budget_seconds;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sample(&self) -> Result<&SampleSection> {
        self.sample.as_ref().ok_or_else(|| cfg_err("missing [sample] section"))
    }

    pub fn count(&self) -> Result<&CountSection> {
        self.count.as_ref().ok_or_else(|| cfg_err("missing [count] section"))
    }
}
