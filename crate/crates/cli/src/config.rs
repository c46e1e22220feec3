//! Run configuration: one JSON document per invocation, overrides applied
//! to the raw JSON before it is typed and validated.

use std::fs::File;
use std::path::{Path, PathBuf};

use hk_echo::harness::SweepSpec;
use hk_echo::io::read_population;
use hk_echo::popgen::{clipped_normal_mixture, evenly_spaced};
use hk_echo::{DynamicsConfig, Error, MixtureSpec, PlacementConfig, Population};
use serde::Deserialize;
use serde_json::Value;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default)]
    pub population: Option<PopulationSource>,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub placement: Option<PlacementConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub graph: GraphOptions,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationSource {
    Mixture(MixtureSpec),
    EvenlySpaced {
        n: usize,
        epsilon: f64,
    },
    /// Relative paths resolve against the config file's directory.
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphOptions {
    pub step: usize,
    pub formats: Vec<GraphFormat>,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            step: 0,
            formats: vec![GraphFormat::Dot, GraphFormat::Json],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Dot,
    Json,
}

/// Failure while assembling a configuration, split by exit status.
#[derive(Debug)]
pub enum LoadError {
    Invalid(String),
    Io(String),
}

impl From<Error> for LoadError {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            LoadError::Invalid(e.to_string())
        } else {
            LoadError::Io(e.to_string())
        }
    }
}

/// Reads the config file, applies `--seed` then `--set` overrides and types
/// the result.
pub fn load(
    path: &Path,
    seed: Option<u64>,
    sets: &[String],
) -> Result<(Config, PathBuf), LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| LoadError::Invalid(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        apply_seed(&mut doc, seed);
    }
    for s in sets {
        apply_set(&mut doc, s).map_err(LoadError::Invalid)?;
    }
    let cfg: Config =
        serde_json::from_value(doc).map_err(|e| LoadError::Invalid(format!("config: {e}")))?;
    if cfg.version != CONFIG_VERSION {
        return Err(LoadError::Invalid(format!(
            "config version {} not supported (expected {CONFIG_VERSION})",
            cfg.version
        )));
    }
    cfg.dynamics.validate()?;
    if let Some(p) = &cfg.placement {
        p.validate()?;
    }
    if let Some(s) = &cfg.sweep {
        s.validate()?;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

/// `--seed N` sets every seed the document already has a place for.
fn apply_seed(doc: &mut Value, seed: u64) {
    let is_mixture = doc.pointer("/population/kind").and_then(Value::as_str) == Some("mixture");
    if is_mixture {
        doc["population"]["rng_seed"] = seed.into();
    }
    if doc.get("placement").is_some_and(Value::is_object) {
        doc["placement"]["rng_seed"] = seed.into();
    }
    if doc.get("sweep").is_some_and(Value::is_object) {
        doc["sweep"]["seed_base"] = seed.into();
    }
}

/// Applies one `dotted.key=value` override. The value is parsed as JSON and
/// falls back to a plain string; missing intermediate objects are created.
pub fn apply_set(doc: &mut Value, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override `{assignment}` is not key=value"))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(format!("override `{assignment}` has an empty key segment"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let last = k + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| format!("`{part}` in `{key}` must index an array"))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| format!("index {idx} in `{key}` out of range ({len})"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(format!("`{key}` descends into a non-object value")),
        };
    }
    unreachable!("loop returns on the last segment")
}

impl Config {
    pub fn build_population(&self, base: &Path) -> Result<Population, LoadError> {
        let src = self
            .population
            .as_ref()
            .ok_or_else(|| LoadError::Invalid("config has no `population` section".into()))?;
        Ok(match src {
            PopulationSource::Mixture(spec) => clipped_normal_mixture(spec)?,
            PopulationSource::EvenlySpaced { n, epsilon } => evenly_spaced(*n, *epsilon)?,
            PopulationSource::Csv { path } => {
                let full = base.join(path);
                let f = File::open(&full)
                    .map_err(|e| LoadError::Io(format!("{}: {e}", full.display())))?;
                read_population(f)?
            }
        })
    }
}
