use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Record of one invocation, written next to its outputs. Contains no
/// timestamps so that reruns reproduce it byte for byte.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<PathBuf>,
    pub parameters: BTreeMap<String, Value>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, path: &Path) -> Result<Self, CliError> {
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "input file {} does not exist",
                path.display()
            )));
        }
        self.inputs.push(path.to_path_buf());
        Ok(self)
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable"),
        );
        self
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// `out.csv` -> `out.manifest.json`.
    pub fn path_for(out: &Path) -> PathBuf {
        out.with_extension("manifest.json")
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        triphoton::formats::write_json(path, self)?;
        Ok(())
    }
}
