//! Run configuration: built-in defaults, then a `key = value` file, then flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use hyperwalk::lattice::GroupFixture;
use hyperwalk::Field;
use serde::Serialize;
use thiserror::Error;

/// Keys accepted in config files; flags use the same names with dashes.
pub const KEYS: &[&str] = &[
    "ball_radius",
    "depth",
    "dim",
    "field",
    "group",
    "horizon",
    "measure",
    "r_f",
    "r_v",
    "runs",
    "samples",
    "seed",
    "tol",
    "trace",
    "trace_runs",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey { path: String, line: usize, key: String },
    #[error("{path}:{line}: duplicate key `{key}`")]
    Duplicate { path: String, line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str, path: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { path: path.into(), line: i + 1 })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { path: path.into(), line: i + 1 });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { path: path.into(), line: i + 1, key: key.into() });
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::Duplicate { path: path.into(), line: i + 1, key: key.into() });
        }
    }
    Ok(map)
}

pub fn read_config(path: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    parse_config(&text, path)
}

/// Validated settings. Output locations are not part of it, so reports do
/// not depend on where they are written.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub field: Field,
    pub dim: usize,
    pub group: String,
    pub seed: u64,
    /// Command-specific sample count; `None` picks the command default.
    pub samples: Option<u64>,
    pub runs: u64,
    pub tol: Option<f64>,
    pub depth: usize,
    pub horizon: usize,
    pub ball_radius: usize,
    pub r_f: Option<f64>,
    pub r_v: Option<f64>,
    pub measure: Option<PathBuf>,
    pub trace: bool,
    pub trace_runs: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            field: Field::C,
            dim: 2,
            group: "gamma2".into(),
            seed: 1,
            samples: None,
            runs: 100_000,
            tol: None,
            depth: 8,
            horizon: 60,
            ball_radius: 14,
            r_f: None,
            r_v: None,
            measure: None,
            trace: false,
            trace_runs: 10,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Value { key: key.into(), value: value.into(), reason: reason.into() }
}

fn in_range(key: &str, value: &str, lo: usize, hi: usize) -> Result<usize, ConfigError> {
    let v: usize = parse(key, value)?;
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(bad(key, value, &format!("expected {lo}..={hi}")))
    }
}

fn positive(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse(key, value)?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, value, "expected a positive finite number"))
    }
}

impl RunConfig {
    /// Applies `key -> value` settings over the defaults.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        for (k, v) in map {
            let v = v.as_str();
            match k.as_str() {
                "field" => c.field = parse(k, v)?,
                "dim" => c.dim = in_range(k, v, 1, 8)?,
                "group" => {
                    parse::<GroupFixture>(k, v)?;
                    c.group = v.into();
                }
                "seed" => c.seed = parse(k, v)?,
                "samples" => c.samples = Some(parse(k, v)?),
                "runs" => c.runs = parse(k, v)?,
                "tol" => c.tol = Some(positive(k, v)?),
                "depth" => c.depth = in_range(k, v, 1, 12)?,
                "horizon" => c.horizon = in_range(k, v, 1, 10_000)?,
                "ball_radius" => c.ball_radius = in_range(k, v, 1, 16)?,
                "r_f" => c.r_f = Some(positive(k, v)?),
                "r_v" => c.r_v = Some(positive(k, v)?),
                "measure" => c.measure = Some(PathBuf::from(v)),
                "trace" => c.trace = parse(k, v)?,
                "trace_runs" => c.trace_runs = parse(k, v)?,
                _ => return Err(ConfigError::UnknownKey { path: "<flags>".into(), line: 0, key: k.clone() }),
            }
        }
        Ok(c)
    }
}
