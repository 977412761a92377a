//! Run configurations: JSON files with `--set key=value` overrides layered on
//! top, validated against typed structs that reject unknown keys.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use deepwas_core::benchmark::BenchConfig;
use deepwas_core::corpus::SimulateConfig;
use deepwas_core::pipeline::{PipelineConfig, WindowConfig};

/// A malformed configuration or command line (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateRun {
    pub out_dir: Option<PathBuf>,
    pub simulate: SimulateConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecomputeRun {
    pub corpus: Option<PathBuf>,
    pub windows: WindowConfig,
    /// Defaults to `windows.dwpw` inside the corpus directory.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    pub corpus: Option<PathBuf>,
    /// Precomputed windows; computed from `pipeline.windows` when absent.
    pub windows_file: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalRun {
    pub corpus: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub windows_file: Option<PathBuf>,
    pub windows: WindowConfig,
    /// Explicit held-out windows; the contiguous tail of `heldout_fraction`
    /// of the windows when empty.
    pub heldout_window_ids: Vec<usize>,
    pub heldout_fraction: f64,
    /// Report path; stdout when absent.
    pub out: Option<PathBuf>,
}

impl Default for EvalRun {
    fn default() -> Self {
        Self {
            corpus: None,
            model: None,
            windows_file: None,
            windows: WindowConfig::default(),
            heldout_window_ids: Vec::new(),
            heldout_fraction: PipelineConfig::default().heldout_fraction,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchRun {
    pub corpus: Option<PathBuf>,
    pub windows_file: Option<PathBuf>,
    pub windows: WindowConfig,
    pub bench: BenchConfig,
    /// JSON-lines path; stdout when absent.
    pub out: Option<PathBuf>,
}

/// Splits `key=value`.
pub fn parse_set(arg: &str) -> Result<(String, String), String> {
    match arg.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(format!("expected key=value, got {arg:?}")),
    }
}

/// Sets a dotted `key` inside `root`. The value is parsed as JSON, falling
/// back to a plain string, so `epochs=5` and `out_dir=runs/a` both work.
pub fn apply_set(root: &mut Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut cur = root;
    for part in parents {
        cur = match cur {
            Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default())),
            _ => return Err(ConfigError(format!("cannot set {key}: {part} is not an object"))),
        };
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
    }
    match cur {
        Value::Object(map) => {
            map.insert(last.to_string(), value);
            Ok(())
        }
        _ => Err(ConfigError(format!("cannot set {key}: parent is not an object"))),
    }
}

/// Loads `T` from an optional JSON file and applies overrides in order.
pub fn resolve<T>(file: Option<&Path>, sets: &[(String, String)]) -> anyhow::Result<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let base: T = match file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| deepwas_core::Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?
        }
        None => T::default(),
    };
    if sets.is_empty() {
        return Ok(base);
    }
    let mut value = serde_json::to_value(&base).expect("config serializes");
    for (k, v) in sets {
        apply_set(&mut value, k, v)?;
    }
    Ok(serde_json::from_value(value).map_err(|e| ConfigError(e.to_string()))?)
}

/// Unwraps a required path.
pub fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf, ConfigError> {
    path.clone()
        .ok_or_else(|| ConfigError(format!("{what} is required (flag or config key)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_sets_parse_json_then_strings() {
        let sets = vec![
            ("pipeline.train.epochs".to_string(), "3".to_string()),
            ("out_dir".to_string(), "runs/a".to_string()),
            ("pipeline.train.learning_rate".to_string(), "0.01".to_string()),
        ];
        let run: TrainRun = resolve(None, &sets).unwrap();
        assert_eq!(run.pipeline.train.epochs, 3);
        assert_eq!(run.out_dir.unwrap(), PathBuf::from("runs/a"));
        assert_eq!(run.pipeline.train.learning_rate, Some(0.01));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let sets = vec![("pipeline.train.epochz".to_string(), "3".to_string())];
        let err = resolve::<TrainRun>(None, &sets).unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn set_needs_equals() {
        assert!(parse_set("a.b").is_err());
        assert_eq!(parse_set("a=b=c").unwrap(), ("a".into(), "b=c".into()));
    }
}
