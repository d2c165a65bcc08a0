//! Batch runner: validates a manifest against the shared schema, runs the
//! experiment, writes its data files and a run report with checksums.

pub mod encode;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod palette;

use std::path::{Path, PathBuf};

use lab_core::schema;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use error::{CliError, Result};
pub use manifest::{ExperimentManifest, OutputSpec};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WrittenFile {
    pub kind: String,
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub lab_cli: &'static str,
    pub lab_core: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub palette: Option<String>,
}

/// Contents of `report.json`. Holds nothing that varies between identical
/// runs, so the report itself is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub params: Value,
    pub seed: u64,
    pub versions: Versions,
    pub outputs: Vec<WrittenFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Validates, runs and writes every output plus the report. `threads`
/// sizes a dedicated worker pool; `None` uses the global one.
pub fn run_manifest(manifest: &ExperimentManifest, out_dir: &Path, threads: Option<usize>) -> Result<RunReport> {
    let schema = schema::lookup(&manifest.experiment)?;
    let params = schema.validate(&manifest.params)?;

    let mut requested: Vec<OutputSpec> = Vec::new();
    for o in &manifest.outputs {
        if !requested.iter().any(|r| r.kind == o.kind) {
            requested.push(o.clone());
        }
    }
    if requested.is_empty() {
        let first = experiments::output_kinds(&manifest.experiment)[0];
        requested.push(OutputSpec::parse(first));
    }
    let kinds: Vec<String> = requested.iter().map(|o| o.kind.clone()).collect();

    let compute = || experiments::run(&params, manifest.seed, &kinds);
    let data = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Threads(e.to_string()))?
            .install(compute),
        None => compute(),
    }?;

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut outputs = Vec::with_capacity(requested.len());
    for o in &requested {
        let bytes = &data[&o.kind];
        let rel = o
            .path
            .clone()
            .unwrap_or_else(|| experiments::default_path(&manifest.experiment, &o.kind));
        let full: PathBuf = out_dir.join(&rel);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&full, bytes).map_err(|e| CliError::io(&full, e))?;
        outputs.push(WrittenFile {
            kind: o.kind.clone(),
            path: rel,
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
    }

    let palette = match manifest.experiment.as_str() {
        "julia" | "mandelbrot" => {
            let p = palette::lookup(params.text("palette")?).expect("schema restricts palette names");
            Some(format!("{}@{}", p.name, p.version))
        }
        _ => None,
    };
    let report = RunReport {
        experiment: manifest.experiment.clone(),
        params: params.to_json(),
        seed: manifest.seed,
        versions: Versions {
            lab_cli: env!("CARGO_PKG_VERSION"),
            lab_core: lab_core::VERSION,
            palette,
        },
        outputs,
    };
    let report_path = out_dir.join(REPORT_FILE);
    let mut text = serde_json::to_vec_pretty(&report).expect("report serializes");
    text.push(b'\n');
    std::fs::write(&report_path, text).map_err(|e| CliError::io(&report_path, e))?;
    Ok(report)
}

/// Help epilogue listing every experiment with its required parameters.
pub fn experiments_help() -> String {
    let mut s = String::from("Experiments (required parameters):\n");
    for e in schema::registry() {
        let required: Vec<&str> = e.required_keys().collect();
        let req = if required.is_empty() {
            "none".to_string()
        } else {
            required.join(", ")
        };
        s.push_str(&format!("  {:<13} {}\n  {:<13}   required: {}\n", e.name, e.summary, "", req));
        s.push_str(&format!(
            "  {:<13}   outputs: {}\n",
            "",
            experiments::output_kinds(&e.name).join(", ")
        ));
    }
    s
}
