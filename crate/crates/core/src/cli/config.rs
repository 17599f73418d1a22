//! Run configuration: a TOML file with `[physics]`, `[noise]`, `[method]`,
//! `[compare]`, `[grid]` and `[output]` sections, plus dotted `--set`
//! overrides.
//!
//! Axes accept a scalar, a list, or a range table:
//!
//! ```toml
//! [physics]
//! alpha = { from = 0.05, to = 5.0, points = 21, spacing = "log", signs = "both" }
//! delta = [0.0, 0.5, 1.5]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::AnalyticKind;
use crate::dynamics::WindowPolicy;
use crate::hierarchy::{DEFAULT_N_MAX, N_MAX_CAP};
use crate::model::{ModelError, NoiseParams, SystemParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid override `{0}`: expected key.path=value")]
    Override(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signs {
    #[default]
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeAxis {
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default)]
    pub signs: Signs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Value(f64),
    List(Vec<f64>),
    Range(RangeAxis),
}

impl Axis {
    pub fn values(&self, field: &str) -> Result<Vec<f64>, ConfigError> {
        let out = match self {
            Axis::Value(x) => vec![*x],
            Axis::List(xs) => xs.clone(),
            Axis::Range(r) => r.values(field)?,
        };
        if out.is_empty() {
            return Err(invalid(field, "axis has no points"));
        }
        if let Some(x) = out.iter().find(|x| !x.is_finite()) {
            return Err(invalid(field, format!("non-finite axis value {x}")));
        }
        Ok(out)
    }
}

impl RangeAxis {
    fn values(&self, field: &str) -> Result<Vec<f64>, ConfigError> {
        if self.points == 0 {
            return Err(invalid(field, "points must be >= 1"));
        }
        let n = self.points;
        let frac = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        let base: Vec<f64> = match self.spacing {
            Spacing::Linear => (0..n).map(|i| self.from + (self.to - self.from) * frac(i)).collect(),
            Spacing::Log => {
                if !(self.from > 0.0 && self.to > 0.0) {
                    return Err(invalid(field, "log spacing needs positive `from` and `to`"));
                }
                let (a, b) = (self.from.ln(), self.to.ln());
                (0..n).map(|i| (a + (b - a) * frac(i)).exp()).collect()
            }
        };
        Ok(match self.signs {
            Signs::Positive => base,
            Signs::Negative => base.iter().rev().map(|x| -x).collect(),
            Signs::Both => base.iter().rev().map(|x| -x).chain(base.iter().copied()).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Axis>,
    pub v: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            delta: None,
            v: 1.0,
        }
    }
}

/// Noise given by one of the pairs `(D, gamma)`, `(D_tilde, gamma_tilde)`,
/// `(Gamma, gamma)` or `(Gamma, gamma_tilde)`; empty means noiseless.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "D_tilde", default, skip_serializing_if = "Option::is_none")]
    pub d_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_tilde: Option<f64>,
    #[serde(rename = "Gamma", default, skip_serializing_if = "Option::is_none")]
    pub gamma_rate: Option<f64>,
}

impl NoiseConfig {
    pub fn resolve(&self, p: &SystemParams) -> Result<NoiseParams, ConfigError> {
        let scale = p.alpha.abs().sqrt();
        let np = match (self.amplitude, self.gamma, self.d_tilde, self.gamma_tilde, self.gamma_rate) {
            (None, None, None, None, None) => NoiseParams::silent(),
            (Some(d), None, None, None, None) | (None, None, Some(d), None, None) if d == 0.0 => NoiseParams::silent(),
            (Some(d), Some(g), None, None, None) => NoiseParams::new(d, g)?,
            (None, None, Some(d), Some(g), None) => NoiseParams::from_ratios(p, d, g)?,
            (None, Some(g), None, None, Some(rate)) => NoiseParams::from_decoherence(rate, g)?,
            (None, None, None, Some(g), Some(rate)) => NoiseParams::from_decoherence(rate, g * scale)?,
            _ => {
                return Err(invalid(
                    "noise",
                    "give exactly one of (D, gamma), (D_tilde, gamma_tilde), (Gamma, gamma), (Gamma, gamma_tilde)",
                ))
            }
        };
        Ok(np)
    }
}

/// Integration pipeline for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodSpec {
    #[default]
    Sse,
    Hierarchy,
    Subspace,
    Analytic(AnalyticKind),
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Sse => f.write_str("sse"),
            MethodSpec::Hierarchy => f.write_str("hierarchy"),
            MethodSpec::Subspace => f.write_str("subspace"),
            MethodSpec::Analytic(k) => write!(f, "analytic:{}", k.as_str()),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sse" => Ok(MethodSpec::Sse),
            "hierarchy" => Ok(MethodSpec::Hierarchy),
            "subspace" => Ok(MethodSpec::Subspace),
            _ => {
                let kind = s.strip_prefix("analytic:").ok_or_else(|| {
                    format!("unknown method `{s}` (expected sse, hierarchy, subspace or analytic:<kind>)")
                })?;
                AnalyticKind::ALL
                    .into_iter()
                    .find(|k| k.as_str() == kind)
                    .map(MethodSpec::Analytic)
                    .ok_or_else(|| {
                        let names: Vec<&str> = AnalyticKind::ALL.iter().map(|k| k.as_str()).collect();
                        format!("unknown analytic kind `{kind}` (one of {})", names.join(", "))
                    })
            }
        }
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfig {
    pub name: MethodSpec,
    pub samples: usize,
    pub seed: u64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            name: MethodSpec::Sse,
            samples: 200,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub methods: Vec<MethodSpec>,
    /// Largest closed-form vs subspace deviation tolerated where both are valid.
    pub tolerance: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            methods: vec![
                MethodSpec::Sse,
                MethodSpec::Subspace,
                MethodSpec::Analytic(AnalyticKind::WhiteNoiseOrder2),
            ],
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub c: f64,
    pub h: f64,
    pub n_max: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let w = WindowPolicy::default();
        Self {
            c: w.c,
            h: w.h,
            n_max: DEFAULT_N_MAX,
        }
    }
}

impl GridConfig {
    pub fn policy(&self) -> WindowPolicy {
        WindowPolicy { c: self.c, h: self.h }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("nrlz-out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub physics: PhysicsConfig,
    pub noise: NoiseConfig,
    pub method: MethodConfig,
    pub compare: CompareConfig,
    pub grid: GridConfig,
    pub output: OutputConfig,
}

/// Command-line values that take precedence over the file and `--set`.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// File (if any), then `--set` entries, then dedicated flags.
    pub fn load(path: Option<&Path>, flags: &FlagOverrides) -> Result<Self, ConfigError> {
        let text = match path {
            Some(path) => std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml_str(&text, flags)
    }

    pub fn from_toml_str(text: &str, flags: &FlagOverrides) -> Result<Self, ConfigError> {
        // Deserializing the raw text first keeps line and column diagnostics.
        let _: RunConfig = toml::from_str(text)?;
        let mut table: toml::Table = toml::from_str(text)?;
        for entry in &flags.sets {
            apply_set(&mut table, entry)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table).try_into()?;
        if let Some(seed) = flags.seed {
            cfg.method.seed = seed;
        }
        if let Some(samples) = flags.samples {
            cfg.method.samples = samples;
        }
        if let Some(out) = &flags.out {
            cfg.output.dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.physics.v > 0.0 && self.physics.v.is_finite()) {
            return Err(invalid("physics.v", "must be finite and > 0"));
        }
        if !(self.grid.c > 0.0 && self.grid.c.is_finite()) {
            return Err(invalid("grid.c", "must be finite and > 0"));
        }
        if !(self.grid.h > 0.0 && self.grid.h.is_finite()) {
            return Err(invalid("grid.h", "must be finite and > 0"));
        }
        if self.grid.n_max > N_MAX_CAP {
            return Err(invalid("grid.n_max", format!("must be <= {N_MAX_CAP}")));
        }
        if self.method.samples < 2 {
            return Err(invalid("method.samples", "must be >= 2"));
        }
        if !(self.compare.tolerance >= 0.0) {
            return Err(invalid("compare.tolerance", "must be >= 0"));
        }
        for (field, axis) in [("physics.alpha", &self.physics.alpha), ("physics.delta", &self.physics.delta)] {
            if let Some(axis) = axis {
                axis.values(field)?;
            }
        }
        if let Some(alpha) = &self.physics.alpha {
            if alpha.values("physics.alpha")?.contains(&0.0) {
                return Err(invalid("physics.alpha", "sweep rate must be nonzero"));
            }
        }
        Ok(())
    }

    pub fn alpha_values(&self, default: &Axis) -> Result<Vec<f64>, ConfigError> {
        self.physics.alpha.as_ref().unwrap_or(default).values("physics.alpha")
    }

    pub fn delta_values(&self, default: &Axis) -> Result<Vec<f64>, ConfigError> {
        self.physics.delta.as_ref().unwrap_or(default).values("physics.delta")
    }

    pub fn system(&self, alpha: f64, delta: f64) -> Result<SystemParams, ConfigError> {
        Ok(SystemParams::with_coupling(alpha, self.physics.v, delta)?)
    }
}

fn apply_set(table: &mut toml::Table, entry: &str) -> Result<(), ConfigError> {
    let (key, raw) = entry.split_once('=').ok_or_else(|| ConfigError::Override(entry.to_string()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(entry.to_string()));
    }
    let raw = raw.trim();
    // Bare words that are not TOML literals are taken as strings.
    let value = toml::from_str::<toml::Table>(&format!("x = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, path) = parts.split_last().expect("non-empty key");
    let mut cursor = table;
    for part in path {
        let next = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = next.as_table_mut().ok_or_else(|| ConfigError::Override(entry.to_string()))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}
