//! On-disk run artifacts: run directories, self-contained checkpoints, and
//! corpus loading for both file-backed and synthetic data.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chronoprompt::backend::{MaskedLmBackend, MockMlm};
use chronoprompt::corpus::{load_corpus, Split};
use chronoprompt::evaluator::MetricsReport;
use chronoprompt::seeding::derive_seed_indexed;
use chronoprompt::synthetic::separable_corpus;
use chronoprompt::templates::Template;
use chronoprompt::trainer::snapshot_id;
use chronoprompt::verbalizer::RelationSchema;
use chronoprompt::Corpus;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::{RunConfig, SYNTHETIC_DATA};
use crate::Failure;

/// Synthetic corpus sizes per split, large enough to train against and small
/// enough for instant runs.
const SYNTHETIC_SIZES: [(Split, usize); 3] =
    [(Split::Train, 80), (Split::Dev, 20), (Split::Test, 20)];

/// Everything needed to rebuild the trained model without the original
/// config or data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredCheckpoint {
    pub config_hash: String,
    pub schema_id: String,
    pub template: Template,
    pub backend: StoredBackend,
    pub snapshot_id: String,
    pub epoch: usize,
    pub dev_metrics: MetricsReport,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredBackend {
    pub seed: u64,
    pub hidden_dim: usize,
    pub feature_dim: usize,
    pub max_len: usize,
    pub vocab: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Run directory for a resolved config: short hash plus seed, no timestamps,
/// so identical settings map to the same directory.
pub fn run_dir(root: &Path, config_hash: &str, seed: u64) -> PathBuf {
    root.join(format!("{}-s{seed}", &config_hash[..12]))
}

/// Create the run directory, refusing to overwrite an existing run unless
/// forced.
pub fn prepare_run_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !force {
            return Err(Failure::Usage(format!(
                "run directory {} already exists for this config hash; pass --force to overwrite",
                dir.display()
            ))
            .into());
        }
        std::fs::remove_dir_all(dir)
            .with_context(|| format!("clearing {}", dir.display()))?;
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

/// Load one split, either from `{data}/{split}.jsonl` or the built-in
/// synthetic corpus when `paths.data = "synthetic"`.
pub fn load_split(config: &RunConfig, schema: &RelationSchema, split: Split) -> Result<Corpus> {
    if config.paths.data == SYNTHETIC_DATA {
        let (_, n) = SYNTHETIC_SIZES
            .iter()
            .find(|(s, _)| *s == split)
            .expect("every split has a size");
        let seed = derive_seed_indexed(config.seed, "synthetic-data", split as u64);
        return Ok(separable_corpus(schema, split, *n, seed)?);
    }
    let path = PathBuf::from(&config.paths.data).join(format!("{split}.jsonl"));
    if !path.is_file() {
        return Err(Failure::Missing(format!("corpus file {}", path.display())).into());
    }
    Ok(load_corpus(&path, schema, split)?)
}

pub fn save_checkpoint(
    dir: &Path,
    config_hash: &str,
    schema: &RelationSchema,
    template: &Template,
    backend: &MockMlm,
    checkpoint: &chronoprompt::Checkpoint,
) -> Result<PathBuf> {
    let stored = StoredCheckpoint {
        config_hash: config_hash.to_string(),
        schema_id: schema.schema_id.clone(),
        template: template.clone(),
        backend: StoredBackend {
            seed: backend.seed(),
            hidden_dim: backend.hidden_dim(),
            feature_dim: backend.feature_dim(),
            max_len: backend.max_len(),
            vocab: backend.vocab().to_vec(),
        },
        snapshot_id: checkpoint.snapshot_id.clone(),
        epoch: checkpoint.epoch,
        dev_metrics: checkpoint.dev_metrics.clone(),
        params: checkpoint.params.clone(),
    };
    let path = dir.join("checkpoint.json");
    write_json(&path, &stored)?;
    Ok(path)
}

/// Load a checkpoint from its file or from a run directory containing one,
/// rebuild the backend, and verify parameter integrity.
pub fn load_checkpoint(path: &Path) -> Result<(StoredCheckpoint, MockMlm)> {
    let file = if path.is_dir() { path.join("checkpoint.json") } else { path.to_path_buf() };
    if !file.is_file() {
        return Err(Failure::Missing(format!("checkpoint {}", file.display())).into());
    }
    let stored: StoredCheckpoint = read_json(&file)?;
    let b = &stored.backend;
    let mut backend =
        MockMlm::from_vocab_list(b.seed, b.vocab.clone(), b.hidden_dim, b.feature_dim, b.max_len);
    backend.restore(&stored.params)?;
    let got = snapshot_id(backend.params());
    if got != stored.snapshot_id {
        return Err(Failure::Usage(format!(
            "checkpoint {} is corrupt: parameter digest {got} does not match recorded {}",
            file.display(),
            stored.snapshot_id
        ))
        .into());
    }
    Ok((stored, backend))
}
