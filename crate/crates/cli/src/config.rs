//! Run configuration.
//!
//! The file is TOML restricted to dotted keys, for example
//!
//! ```toml
//! seed = 7
//! kernel.lengthscale = 0.5
//! grid.parts = [16, 64]
//! bootstrap.scheme = "multiplier"
//! ```
//!
//! Values are resolved in this order, later sources winning: built-in
//! defaults, the config file, `--set key=value` overrides, dedicated flags
//! such as `--seed` and `--out`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dncboot::bands::required_replicates;
use dncboot::bootstrap::{MultiplierDist, Scheme};
use dncboot::kernel::KernelSpec;
use dncboot::simulation::{CoverageSettings, DgpSpec, PartitionRule, TrueFunction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub r_prime: f64,
    pub c: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { r_prime: 0.5, c: 1.0 }
    }
}

/// Partition counts and prediction-set sizes. `fit` and `bands` use the
/// first entry of each list; `coverage` runs every combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub parts: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            parts: vec![16, 64],
            sizes: vec![4, 64],
        }
    }
}

impl Grid {
    /// The grid of the large-scale study: `P = 2^6..2^12`, `T = 2^1..2^9`.
    pub fn full() -> Self {
        Self {
            parts: (6..=12).map(|e| 1 << e).collect(),
            sizes: (1..=9).map(|e| 1 << e).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsSection {
    /// Miss probability; bands have simultaneous level `1 - alpha`.
    pub alpha: f64,
}

impl Default for BandsSection {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSection {
    pub replicates: usize,
    pub scheme: Scheme,
    pub multiplier: MultiplierDist,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            replicates: 1000,
            scheme: Scheme::Empirical,
            multiplier: MultiplierDist::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DgpSection {
    pub n: usize,
    pub truth: TrueFunction,
    pub noise_scale: f64,
}

impl Default for DgpSection {
    fn default() -> Self {
        Self {
            n: 4096,
            truth: TrueFunction::Sine,
            noise_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// CSV with covariate columns followed by `y`. When absent, `fit` and
    /// `bands` simulate a sample from the `dgp` section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageSection {
    pub trials: usize,
}

impl Default for CoverageSection {
    fn default() -> Self {
        Self { trials: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateSection {
    pub ns: Vec<usize>,
    pub reps: usize,
    pub grid_size: usize,
    /// `"sqrt_pow2"` or `{ fixed = P }`.
    pub partitions: PartitionRule,
}

impl Default for RateSection {
    fn default() -> Self {
        Self {
            ns: (10..=14).map(|e| 1 << e).collect(),
            reps: 20,
            grid_size: 512,
            partitions: PartitionRule::SqrtPow2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    /// Number of eigenvalues `j^{-b}` kept in the spectral model.
    pub truncation: usize,
    pub rhos: Vec<f64>,
    /// Random eigen-expansions used for the interpolation check.
    pub expansions: usize,
    pub grid_size: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            truncation: 10_000,
            rhos: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            expansions: 100,
            grid_size: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub kernel: KernelSpec,
    pub schedule: Schedule,
    pub grid: Grid,
    pub bands: BandsSection,
    pub bootstrap: BootstrapSection,
    pub dgp: DgpSection,
    pub data: DataSection,
    pub coverage: CoverageSection,
    pub rate: RateSection,
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            kernel: KernelSpec::default(),
            schedule: Schedule::default(),
            grid: Grid::default(),
            bands: BandsSection::default(),
            bootstrap: BootstrapSection::default(),
            dgp: DgpSection::default(),
            data: DataSection::default(),
            coverage: CoverageSection::default(),
            rate: RateSection::default(),
            diagnostics: DiagnosticsSection::default(),
            output: OutputSection::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parse a `--set` value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Override(spec.to_string()))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|k| k.is_empty()) {
        return Err(CliError::Override(spec.to_string()));
    }
    let (last, parents) = path.split_last().expect("split yields one item");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("`{k}` in `{key}` is not a section")))?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Parse a config document, apply overrides and validate.
    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse()?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| CliError::File {
                path: p.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_str_with(&text, overrides)
    }

    /// Range checks for every field, run before any computation.
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let Schedule { r_prime, c } = self.schedule;
        if !(0.5..=1.0).contains(&r_prime) {
            return Err(invalid(format!("schedule.r_prime must lie in [0.5, 1], got {r_prime}")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid(format!("schedule.c must be positive, got {c}")));
        }
        if self.grid.parts.is_empty() || self.grid.parts.contains(&0) {
            return Err(invalid("grid.parts must be a non-empty list of positive integers"));
        }
        if self.grid.sizes.is_empty() || self.grid.sizes.contains(&0) {
            return Err(invalid("grid.sizes must be a non-empty list of positive integers"));
        }
        let alpha = self.bands.alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("bands.alpha must lie in (0, 1), got {alpha}")));
        }
        let required = required_replicates(alpha);
        if self.bootstrap.replicates < required {
            return Err(invalid(format!(
                "bootstrap.replicates = {} is below the resolution guard B >= 20 / alpha = {required}",
                self.bootstrap.replicates
            )));
        }
        self.dgp_spec().validate()?;
        if self.coverage.trials == 0 {
            return Err(invalid("coverage.trials must be positive"));
        }
        let rate = &self.rate;
        if rate.ns.is_empty() || rate.ns.contains(&0) || rate.reps == 0 || rate.grid_size == 0 {
            return Err(invalid("rate.ns, rate.reps and rate.grid_size must be positive"));
        }
        if rate.partitions == PartitionRule::Fixed(0) {
            return Err(invalid("rate.partitions fixed count must be positive"));
        }
        let diag = &self.diagnostics;
        if diag.truncation == 0 || diag.grid_size < 2 {
            return Err(invalid("diagnostics.truncation must be positive and grid_size at least 2"));
        }
        if diag.rhos.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(invalid("diagnostics.rhos must be positive"));
        }
        Ok(())
    }

    pub fn dgp_spec(&self) -> DgpSpec {
        DgpSpec {
            n: self.dgp.n,
            truth: self.dgp.truth.clone(),
            noise_scale: self.dgp.noise_scale,
        }
    }

    pub fn coverage_settings(&self) -> CoverageSettings {
        CoverageSettings {
            kernel: self.kernel,
            r_prime: self.schedule.r_prime,
            schedule_c: self.schedule.c,
            alpha: self.bands.alpha,
            replicates: self.bootstrap.replicates,
            scheme: self.bootstrap.scheme,
            multiplier: self.bootstrap.multiplier,
            trials: self.coverage.trials,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Short SHA-256 digest of the settings that affect results. The output
    /// directory is excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = None;
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}
