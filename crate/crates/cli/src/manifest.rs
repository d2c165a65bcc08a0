//! Flat JSON experiment manifests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

/// One requested output file. In JSON either `"kind"` or
/// `{"kind": ..., "path": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "OutputForm")]
pub struct OutputSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OutputForm {
    Kind(String),
    Full { kind: String, path: Option<String> },
}

impl From<OutputForm> for OutputSpec {
    fn from(f: OutputForm) -> Self {
        match f {
            OutputForm::Kind(kind) => OutputSpec { kind, path: None },
            OutputForm::Full { kind, path } => OutputSpec { kind, path },
        }
    }
}

impl OutputSpec {
    /// Parses `KIND` or `KIND=PATH`.
    pub fn parse(text: &str) -> OutputSpec {
        match text.split_once('=') {
            Some((kind, path)) => OutputSpec {
                kind: kind.trim().to_string(),
                path: Some(path.trim().to_string()),
            },
            None => OutputSpec {
                kind: text.trim().to_string(),
                path: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub experiment: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub outputs: Vec<OutputSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentManifest {
    pub fn new(experiment: &str) -> Self {
        ExperimentManifest {
            experiment: experiment.to_string(),
            params: Map::new(),
            outputs: Vec::new(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Manifest {
            path: origin.to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}
