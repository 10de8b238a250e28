//! `run_manifest.json`: how an output directory was produced.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::failure::Failure;

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub stages: Vec<Stage>,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seeds: Vec<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
            stages: Vec::new(),
            clock: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    pub fn output(&mut self, p: impl Into<PathBuf>) {
        self.outputs.push(p.into().display().to_string());
    }

    /// Closes the current stage and starts timing the next.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        let start = self.clock.replace(now).unwrap_or(now);
        self.stages.push(Stage {
            name: name.to_string(),
            seconds: (now - start).as_secs_f64(),
        });
    }

    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        let path = dir.join(RUN_MANIFEST);
        let text = serde_json::to_string_pretty(self).map_err(|e| Failure::new(crate::failure::EXIT_OTHER, e))?;
        fs::write(&path, text + "\n").map_err(|e| Failure::io(&path, e))
    }
}

pub fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}
