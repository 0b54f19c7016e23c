//! Run configuration: a TOML file whose keys are the [`RunConfig`] field names,
//! optionally overridden by `--key value` pairs from the command line.
//!
//! Relative paths in the file resolve against the file's directory; relative
//! paths given as overrides resolve against the working directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::evolution::OrderBasis;
use crate::ingest::ReturnKind;

pub const DEFAULT_WINDOW_CANDIDATES: [usize; 6] = [50, 100, 150, 200, 250, 300];

/// Window length: fixed, or the smallest adequate candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowChoice {
    Fixed(usize),
    #[default]
    Auto,
}

impl fmt::Display for WindowChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowChoice::Fixed(k) => write!(f, "{k}"),
            WindowChoice::Auto => f.write_str("auto"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WindowRepr {
    Fixed(i64),
    Named(String),
}

impl<'de> Deserialize<'de> for WindowChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match WindowRepr::deserialize(d)? {
            WindowRepr::Fixed(k) if k >= 0 => Ok(WindowChoice::Fixed(k as usize)),
            WindowRepr::Fixed(k) => Err(serde::de::Error::custom(format!(
                "window must be a positive integer or \"auto\", got {k}"
            ))),
            WindowRepr::Named(s) if s == "auto" => Ok(WindowChoice::Auto),
            WindowRepr::Named(s) => Err(serde::de::Error::custom(format!(
                "window must be a positive integer or \"auto\", got {s:?}"
            ))),
        }
    }
}

impl Serialize for WindowChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WindowChoice::Fixed(k) => s.serialize_u64(*k as u64),
            WindowChoice::Auto => s.serialize_str("auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub returns_kind: ReturnKind,
    pub window: WindowChoice,
    pub window_candidates: Vec<usize>,
    pub kmo_threshold: f64,
    pub components: usize,
    pub order_basis: OrderBasis,
    /// Variable label, or "last".
    pub marker_variable: String,
    pub cumulative_thresholds: Vec<f64>,
    pub kaiser_cutoffs: Vec<f64>,
    pub output_dir: PathBuf,
    pub drop_first_window: bool,
    pub refresh_interval: usize,
    /// Thread count; 0 uses every available core. Never affects output.
    pub workers: usize,
    pub cell_width: usize,
    pub cell_height: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_path: PathBuf::new(),
            returns_kind: ReturnKind::Log,
            window: WindowChoice::Auto,
            window_candidates: DEFAULT_WINDOW_CANDIDATES.to_vec(),
            kmo_threshold: 0.5,
            components: 10,
            order_basis: OrderBasis::MidpointSort,
            marker_variable: "last".into(),
            cumulative_thresholds: vec![60.0, 70.0, 80.0, 90.0],
            kaiser_cutoffs: vec![1.0, 0.7],
            output_dir: PathBuf::new(),
            drop_first_window: false,
            refresh_interval: 256,
            workers: 0,
            cell_width: 1,
            cell_height: 4,
        }
    }
}

const PATH_KEYS: [&str; 2] = ["input_path", "output_dir"];

/// Parses a command-line override value: TOML syntax first, then a
/// comma-separated list of TOML values, then a bare string.
pub fn parse_override_value(raw: &str) -> toml::Value {
    if let Some(v) = parse_toml_value(raw) {
        return v;
    }
    if raw.contains(',') {
        let items: Option<Vec<toml::Value>> = raw
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(parse_toml_value)
            .collect();
        if let Some(items) = items {
            return toml::Value::Array(items);
        }
    }
    toml::Value::String(raw.to_string())
}

fn parse_toml_value(raw: &str) -> Option<toml::Value> {
    let mut table: toml::Table = toml::from_str(&format!("v = {raw}")).ok()?;
    table.remove("v")
}

fn resolve(base: &Path, value: &mut toml::Value) {
    if let toml::Value::String(s) = value {
        let p = Path::new(s.as_str());
        if p.is_relative() {
            *s = base.join(p).to_string_lossy().into_owned();
        }
    }
}

impl RunConfig {
    /// Parses config text. `base_dir` anchors relative paths from the text.
    pub fn from_toml_str(text: &str, base_dir: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        for key in PATH_KEYS {
            if let Some(v) = table.get_mut(key) {
                resolve(base_dir, v);
            }
        }
        for (key, value) in overrides {
            let key = key.trim_start_matches("--").replace('-', "_");
            table.insert(key, parse_override_value(value));
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml_str(&text, base, overrides)
    }

    /// Every violated invariant, one message each; empty when the config is usable.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.input_path.as_os_str().is_empty() {
            out.push("input_path is required".to_string());
        }
        if self.output_dir.as_os_str().is_empty() {
            out.push("output_dir is required".to_string());
        }
        if self.components < 1 {
            out.push("components must be ≥ 1".to_string());
        }
        match self.window {
            WindowChoice::Fixed(k) if k < 2 => out.push(format!("window must be ≥ 2, got {k}")),
            WindowChoice::Fixed(_) => {}
            WindowChoice::Auto => {
                if self.window_candidates.is_empty() {
                    out.push("window_candidates must not be empty when window = \"auto\"".into());
                }
                if self.window_candidates.windows(2).any(|w| w[0] >= w[1]) {
                    out.push("window_candidates must be strictly ascending".into());
                }
                if self.window_candidates.iter().any(|&k| k < 2) {
                    out.push("window_candidates must all be ≥ 2".into());
                }
            }
        }
        if !(0.0..=1.0).contains(&self.kmo_threshold) {
            out.push(format!("kmo_threshold {} out of range [0, 1]", self.kmo_threshold));
        }
        for &t in &self.cumulative_thresholds {
            if !(t > 0.0 && t <= 100.0) {
                out.push(format!("cumulative threshold {t} out of range (0, 100]"));
            }
        }
        for &c in &self.kaiser_cutoffs {
            if !(c > 0.0 && c.is_finite()) {
                out.push(format!("kaiser cutoff {c} must be > 0"));
            }
        }
        if self.marker_variable.trim().is_empty() {
            out.push("marker_variable must be a label or \"last\"".into());
        }
        if self.refresh_interval < 1 {
            out.push("refresh_interval must be ≥ 1".into());
        }
        if self.cell_width < 1 || self.cell_height < 1 {
            out.push("cell_width and cell_height must be ≥ 1".into());
        }
        out
    }

    /// Diagnostics folded into a single config error.
    pub fn check(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d.join("; ")))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

/// Diagnostics for a config file. Parse failures are reported as diagnostics;
/// only an unreadable file is an error.
pub fn validate_file(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(match RunConfig::from_toml_str(&text, base, &[]) {
        Ok(cfg) => cfg.diagnostics(),
        Err(Error::Config(msg)) => vec![msg],
        Err(e) => vec![e.to_string()],
    })
}
