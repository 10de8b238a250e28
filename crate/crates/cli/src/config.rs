//! Declarative config file plus flag overrides; flags win.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use gsalign::alignment::TrainConfig;
use gsalign::data::{load_corpus, standardize, Recording, SynthSpec, MANIFEST_NAME};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;
use crate::Common;

#[derive(Args, Debug, Clone, Default)]
pub struct TrainOverrides {
    /// GRU hidden units per direction in the aligner.
    #[arg(long, global = true)]
    pub hidden_size: Option<usize>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub train: TrainConfig,
    pub synth: Option<SynthSpec>,
}

pub fn read_file_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

/// The effective training configuration after applying flags.
pub fn train_config(common: &Common) -> Result<TrainConfig, Failure> {
    let mut cfg = read_file_config(common.config.as_deref())?.train;
    let o = &common.train;
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.runs {
        cfg.runs = v;
    }
    if let Some(v) = o.hidden_size {
        cfg.hidden_size = v;
    }
    if let Some(v) = o.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = o.patience {
        cfg.patience = v;
    }
    if let Some(v) = o.learning_rate {
        cfg.learning_rate = v;
    }
    cfg.validate().map_err(Failure::invalid)?;
    Ok(cfg)
}

/// Accepts either a manifest file or a directory containing one.
pub fn manifest_path(corpus: &Path) -> PathBuf {
    if corpus.is_dir() {
        corpus.join(MANIFEST_NAME)
    } else {
        corpus.to_path_buf()
    }
}

/// Loads the corpus and standardizes features with train-partition
/// statistics.
pub fn load_standardized(corpus: &Path) -> Result<Vec<Recording>, Failure> {
    let mut recs = load_corpus(&manifest_path(corpus))?;
    standardize(&mut recs)?;
    Ok(recs)
}

pub fn run_seeds(cfg: &TrainConfig) -> Vec<u64> {
    (0..cfg.runs).map(|r| cfg.run_seed(r)).collect()
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::new(crate::failure::EXIT_OTHER, e))
}
