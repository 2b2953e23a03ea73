//! Run configuration: JSON with flat dotted keys layered over defaults,
//! then command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use spectra_core::datacube::{PlantedConfig, WavelengthGrid, DEFAULT_CHANNELS, DEFAULT_END_NM, DEFAULT_START_NM};
use spectra_core::reduction::ForestConfig;
use spectra_core::scorer::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Origin,
    Fi,
    Pi,
    Pca,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Origin, Method::Fi, Method::Pi, Method::Pca];

    /// Directory name and config spelling.
    pub fn key(self) -> &'static str {
        match self {
            Method::Origin => "origin",
            Method::Fi => "fi",
            Method::Pi => "pi",
            Method::Pca => "pca",
        }
    }

    /// Name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::Origin => "Origin",
            Method::Fi => "FI",
            Method::Pi => "PI",
            Method::Pca => "PCA",
        }
    }

    pub fn is_selection(self) -> bool {
        matches!(self, Method::Fi | Method::Pi)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "origin" => Ok(Method::Origin),
            "fi" => Ok(Method::Fi),
            "pi" => Ok(Method::Pi),
            "pca" => Ok(Method::Pca),
            other => Err(CliError::Usage(format!("unknown method `{other}` (expected origin, fi, pi or pca)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// MVTec AD style directory of RGB images.
    Mvtec,
    /// Generated planted-defect cubes.
    Planted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub source: Source,
    pub root: PathBuf,
    pub class: String,
    /// Images are resized to `size x size` before synthesis; 0 keeps them.
    pub size: usize,
    /// Fraction of anomalous test images moved into training.
    pub anomaly_split: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { source: Source::Mvtec, root: PathBuf::from("data/mvtec"), class: "carpet".into(), size: 256, anomaly_split: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub start_nm: f64,
    pub end_nm: f64,
    pub channels: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { start_nm: DEFAULT_START_NM, end_nm: DEFAULT_END_NM, channels: DEFAULT_CHANNELS }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<WavelengthGrid, CliError> {
        WavelengthGrid::linear(self.start_nm, self.end_nm, self.channels).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    /// Pixels drawn per training image for the forest and PCA.
    pub pixels_per_image: usize,
    /// Pixels per image in the held-out table scored by permutation importance.
    pub validation_pixels_per_image: usize,
    pub balance: bool,
    pub pi_repeats: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self { pixels_per_image: 100, validation_pixels_per_image: 50, balance: true, pi_repeats: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub warmup: usize,
    pub reps: usize,
    /// Cap on the number of test cubes timed; 0 times all of them.
    pub max_cubes: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { warmup: 5, reps: 20, max_cubes: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub planted: PlantedConfig,
    pub grid: GridConfig,
    pub method: Method,
    pub top_n: usize,
    pub ranking: RankingConfig,
    pub forest: ForestConfig,
    pub train: TrainConfig,
    pub bench: BenchConfig,
    /// Top-level seed; every stage seed is derived from it.
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            planted: PlantedConfig::default(),
            grid: GridConfig::default(),
            method: Method::Fi,
            top_n: 6,
            ranking: RankingConfig::default(),
            forest: ForestConfig::default(),
            train: TrainConfig::default(),
            bench: BenchConfig::default(),
            seed: 0,
            out: PathBuf::from("runs"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub class: Option<String>,
    pub method: Option<Method>,
    pub top_n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = cur else {
            return Err(CliError::Config(format!("`{key}`: `{}` is not a section", parts[..i].join("."))));
        };
        if !map.contains_key(*part) {
            return Err(CliError::Config(format!("unknown config key `{key}`")));
        }
        let slot = map.get_mut(*part).expect("checked above");
        if i + 1 == parts.len() {
            if slot.is_object() {
                return Err(CliError::Config(format!("`{key}` is a section, not a value")));
            }
            *slot = value;
            return Ok(());
        }
        cur = slot;
    }
    Ok(())
}

impl RunConfig {
    /// Parses a config document. Keys are dotted paths such as
    /// `"train.learning_rate"`; nested objects are accepted and flattened.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        if !doc.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        let mut pairs = Vec::new();
        flatten("", &doc, &mut pairs);
        let mut merged = serde_json::to_value(RunConfig::default()).expect("defaults serialise");
        // optional fields serialise as null and must still be settable
        for (k, v) in pairs {
            set_dotted(&mut merged, &k, v)?;
        }
        serde_json::from_value(merged).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(c) = &o.class {
            self.dataset.class = c.clone();
        }
        if let Some(m) = o.method {
            self.method = m;
        }
        if let Some(n) = o.top_n {
            self.top_n = n;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.build()?;
        if self.top_n == 0 || self.top_n > self.grid.channels {
            return Err(CliError::Config(format!("top_n must be in 1..={}, got {}", self.grid.channels, self.top_n)));
        }
        if self.dataset.class.is_empty() || self.dataset.class.contains(['/', '\\']) {
            return Err(CliError::Config(format!("invalid class name `{}`", self.dataset.class)));
        }
        if !(0.0..=1.0).contains(&self.dataset.anomaly_split) {
            return Err(CliError::Config("dataset.anomaly_split must lie in [0, 1]".into()));
        }
        if self.ranking.pixels_per_image == 0 || self.ranking.validation_pixels_per_image == 0 || self.ranking.pi_repeats == 0 {
            return Err(CliError::Config("ranking pixel counts and pi_repeats must be positive".into()));
        }
        if self.bench.reps == 0 {
            return Err(CliError::Config("bench.reps must be at least 1".into()));
        }
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn class_dir(&self) -> PathBuf {
        self.out.join(&self.dataset.class)
    }

    pub fn method_dir(&self, m: Method) -> PathBuf {
        self.class_dir().join(m.key())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.class_dir().join("cache")
    }

    /// The configuration as flat dotted keys, sorted.
    pub fn to_flat_json(&self) -> Value {
        let mut pairs = Vec::new();
        flatten("", &serde_json::to_value(self).expect("config serialises"), &mut pairs);
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        Value::Object(pairs.into_iter().collect::<Map<String, Value>>())
    }
}
