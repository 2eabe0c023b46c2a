use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::QaKind;
use crate::qa::QaBackendKind;
use crate::textgen::{EchoBackend, FixtureBackend, GenerationBackend, RemoteBackend};

use super::{PipelineMode, RunOptions};

/// Which generation backend to build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Remote,
    #[default]
    Fixture,
    Echo,
}

impl BackendChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendChoice::Remote => "remote",
            BackendChoice::Fixture => "fixture",
            BackendChoice::Echo => "echo",
        }
    }

    /// Builds the backend. The fixture backend needs a fixture file.
    pub fn build(self, fixtures: Option<&Path>) -> Result<Box<dyn GenerationBackend>, String> {
        match self {
            BackendChoice::Remote => Ok(Box::new(RemoteBackend::from_env())),
            BackendChoice::Echo => Ok(Box::new(EchoBackend::new())),
            BackendChoice::Fixture => {
                let path = fixtures.ok_or("the fixture backend needs a fixture file")?;
                FixtureBackend::from_file(path)
                    .map(|b| Box::new(b) as Box<dyn GenerationBackend>)
                    .map_err(|e| format!("cannot load fixtures {}: {e}", path.display()))
            }
        }
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "remote" => Ok(BackendChoice::Remote),
            "fixture" => Ok(BackendChoice::Fixture),
            "echo" => Ok(BackendChoice::Echo),
            other => Err(format!("unknown backend `{other}` (expected remote, fixture or echo)")),
        }
    }
}

fn default_kinds() -> Vec<QaKind> {
    QaKind::ALL.to_vec()
}

fn default_parallelism() -> usize {
    RunOptions::default().parallelism
}

fn default_max_failure_fraction() -> f64 {
    RunOptions::default().max_failure_fraction
}

fn default_out() -> PathBuf {
    PathBuf::from(".")
}

/// Everything an evaluation run needs, loadable from TOML or JSON.
///
/// ```toml
/// corpus = "fixtures/corpus.json"
/// mode = "question_based"
/// backend = "fixture"
/// fixtures = "fixtures/generations.json"
/// qa = "lexical"
/// kinds = ["visual", "contextual"]
/// parallelism = 4
/// out = "."
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(default)]
    pub splits: Option<PathBuf>,
    #[serde(default)]
    pub mode: PipelineMode,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    #[serde(default)]
    pub qa: QaBackendKind,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<QaKind>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_max_failure_fraction")]
    pub max_failure_fraction: f64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<String>,
}

impl RunConfig {
    /// Defaults for everything but the corpus.
    pub fn new(corpus: impl Into<PathBuf>) -> Self {
        RunConfig {
            corpus: corpus.into(),
            splits: None,
            mode: PipelineMode::default(),
            backend: BackendChoice::default(),
            fixtures: None,
            qa: QaBackendKind::default(),
            kinds: default_kinds(),
            parallelism: default_parallelism(),
            max_failure_fraction: default_max_failure_fraction(),
            out: default_out(),
            cache_dir: None,
            model: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&raw).map_err(|e| e.to_string())
        } else {
            toml::from_str(&raw).map_err(|e| e.to_string())
        };
        let config: RunConfig = parsed.map_err(|e| format!("invalid run config {}: {e}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(format!("max_failure_fraction {} is outside [0, 1]", self.max_failure_fraction));
        }
        if self.kinds.is_empty() {
            return Err("kinds must not be empty".into());
        }
        Ok(())
    }

    pub fn options(&self) -> RunOptions {
        RunOptions { parallelism: self.parallelism, max_failure_fraction: self.max_failure_fraction }
    }
}
