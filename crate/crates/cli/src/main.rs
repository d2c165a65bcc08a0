use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser};
use lab_cli::{experiments_help, run_manifest, CliError, ExperimentManifest, OutputSpec, Result};
use lab_core::schema;

#[derive(Debug, Parser)]
#[command(name = "lab", version, about = "Run a lab experiment and write its data files")]
struct Args {
    /// Experiment identifier; optional when the manifest names one.
    experiment: Option<String>,

    /// JSON manifest to start from; flags override its entries.
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,

    /// Parameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output to write, repeatable; replaces the manifest's output list.
    #[arg(long = "output", value_name = "KIND[=PATH]")]
    output: Vec<String>,

    /// Directory for the data files and report.json.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads for the compute modules.
    #[arg(long, env = "LAB_THREADS", value_name = "N")]
    threads: Option<usize>,

    /// Seed for randomized initial conditions.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

fn build_manifest(args: &Args) -> Result<ExperimentManifest> {
    let mut m = match &args.manifest {
        Some(path) => ExperimentManifest::load(path)?,
        None => {
            let name = args.experiment.clone().ok_or_else(|| CliError::Manifest {
                path: "<command line>".into(),
                reason: "name an experiment or pass --manifest".into(),
            })?;
            ExperimentManifest::new(&name)
        }
    };
    if let Some(name) = &args.experiment {
        if args.manifest.is_some() && *name != m.experiment {
            return Err(CliError::Manifest {
                path: args.manifest.as_ref().unwrap().display().to_string(),
                reason: format!("manifest is for `{}`, not `{name}`", m.experiment),
            });
        }
    }
    let schema = schema::lookup(&m.experiment)?;
    for assignment in &args.set {
        let (key, value) = schema::parse_assignment(schema, assignment)?;
        m.params.insert(key, value);
    }
    if !args.output.is_empty() {
        m.outputs = args.output.iter().map(|o| OutputSpec::parse(o)).collect();
    }
    if let Some(seed) = args.seed {
        m.seed = seed;
    }
    Ok(m)
}

/// Parses the process arguments with the experiment list appended to `--help`.
fn parse_args() -> Args {
    let matches = Args::command().after_help(experiments_help()).get_matches();
    Args::from_arg_matches(&matches).unwrap_or_else(|e| e.exit())
}

fn main() -> ExitCode {
    let args = parse_args();
    let result = build_manifest(&args).and_then(|m| run_manifest(&m, &args.out_dir, args.threads));
    match result {
        Ok(report) => {
            for o in &report.outputs {
                println!("{}  {}", o.sha256, args.out_dir.join(&o.path).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
