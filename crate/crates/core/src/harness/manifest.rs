use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::rl::{CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
use crate::sim::Scenario;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStamp {
    pub name: String,
    /// SHA-256 over the scenario and network documents.
    pub fingerprint: String,
    /// Where it was loaded from: a file path or a catalog name.
    pub source: String,
}

/// A file read by the run, other than a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputStamp {
    pub path: String,
    pub sha256: String,
}

/// What a run needs to be repeated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub scenarios: Vec<ScenarioStamp>,
    #[serde(default)]
    pub inputs: Vec<InputStamp>,
    pub seeds: Vec<u64>,
    pub config: serde_json::Value,
    pub parallel: bool,
    pub threads: Option<usize>,
    pub checkpoint_format: String,
    pub checkpoint_version: u32,
}

impl Manifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Self {
            tool: "mhp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            scenarios: Vec::new(),
            inputs: Vec::new(),
            seeds: Vec::new(),
            config: serde_json::Value::Null,
            parallel: cfg!(feature = "parallel"),
            threads: None,
            checkpoint_format: CHECKPOINT_FORMAT.into(),
            checkpoint_version: CHECKPOINT_VERSION,
        }
    }

    pub fn scenario(mut self, scenario: &Scenario, source: &str) -> Self {
        self.scenarios.push(ScenarioStamp {
            name: scenario.name.clone(),
            fingerprint: scenario.fingerprint().to_string(),
            source: source.into(),
        });
        self
    }

    /// Records a file's path and content hash.
    pub fn input(mut self, path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(InputStamp { path: path.display().to_string(), sha256 });
        Ok(self)
    }

    pub fn seeds(mut self, seeds: &[u64]) -> Self {
        self.seeds.extend_from_slice(seeds);
        self
    }

    pub fn config<T: Serialize>(mut self, config: &T) -> Result<Self, HarnessError> {
        self.config = serde_json::to_value(config)?;
        Ok(self)
    }

    pub fn threads(mut self, cap: Option<usize>) -> Self {
        self.threads = cap;
        self
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
