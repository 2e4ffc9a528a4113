//! Run configuration: one TOML file describes the data, backend, and
//! training settings for a whole workflow, hashed into run directory names.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chronoprompt::evaluator::MetricsMode;
use chronoprompt::seeding::derive_seed;
use chronoprompt::synthetic::separable_schema;
use chronoprompt::verbalizer::{builtin_schema, RelationSchema};
use chronoprompt::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Sentinel accepted in `paths.data` for the built-in synthetic corpus.
pub const SYNTHETIC_DATA: &str = "synthetic";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Directory holding train.jsonl / dev.jsonl / test.jsonl, or the
    /// literal "synthetic".
    pub data: String,
    /// Template pool file written by generate-templates and read by train.
    pub templates: PathBuf,
    /// Root directory for run outputs; overridden by CHRONOPROMPT_RUNS.
    #[serde(default = "default_runs")]
    pub runs: PathBuf,
}

fn default_runs() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    External,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_hidden_dim() -> usize {
    16
}

fn default_feature_dim() -> usize {
    256
}

fn default_max_len() -> usize {
    256
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            seed: 0,
            hidden_dim: default_hidden_dim(),
            feature_dim: default_feature_dim(),
            max_len: default_max_len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_mode")]
    pub eval_mode: MetricsMode,
    pub paths: Paths,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_eval_mode() -> MetricsMode {
    MetricsMode::StrictMicro
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.train.weights.validate()?;
        config.train.validate()?;
        Ok(config)
    }

    /// Split the root seed into per-component seeds. Any `[train]` seed in
    /// the file is deliberately overridden so one root seed governs the
    /// whole run.
    pub fn resolve(&mut self) {
        self.train.seed = derive_seed(self.seed, "train");
    }

    /// Hash of the canonical JSON form. serde_json orders map keys, so the
    /// hash does not depend on key order in the source file. The run root is
    /// excluded: where artifacts land is plumbing, not experiment identity.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value["paths"]["runs"] = serde_json::Value::Null;
        let canon = serde_json::to_string(&value).expect("value serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolve_schema(&self) -> Result<RelationSchema> {
        if self.schema == "synthetic-order" {
            return Ok(separable_schema());
        }
        Ok(builtin_schema(&self.schema)?)
    }

    /// Run root: the --out flag wins, then the environment variable, then
    /// the config file.
    pub fn runs_root(&self, cli_out: Option<&Path>) -> PathBuf {
        if let Some(dir) = cli_out {
            return dir.to_path_buf();
        }
        match std::env::var_os("CHRONOPROMPT_RUNS") {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.paths.runs.clone(),
        }
    }

    pub fn require_mock_backend(&self) -> Result<()> {
        if self.backend.kind == BackendKind::External {
            return Err(crate::Failure::Usage(
                "backend.kind = \"external\" is accepted in configs but no external \
                 backend is wired into this build; use the mock backend"
                    .into(),
            )
            .into());
        }
        Ok(())
    }
}
