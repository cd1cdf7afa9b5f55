//! Experiment runner behind the `deepfact` binary: configuration parsing,
//! seeded data generation and the six experiment kinds.

pub mod config;
pub mod data;
pub mod error;
pub mod experiments;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{parse_config, Experiment, Kind, RawConfig};
pub use error::{CliError, CliResult};
pub use experiments::{run, ExperimentOutput};

/// Reads, validates and runs a configuration file, writing outputs under
/// `out` (or the configured `out`, or the current directory). Returns the
/// directory written to and the summary.
pub fn run_config_file(
    kind: Kind,
    path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<(PathBuf, serde_json::Value)> {
    let text = fs::read_to_string(path)?;
    let exp = parse_config(&text)?.validate(kind, seed)?;
    let dir = out.map(Path::to_path_buf).or_else(|| exp.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let output = run(&exp)?;
    fs::create_dir_all(&dir)?;
    for (name, bytes) in &output.files {
        fs::write(dir.join(name), bytes)?;
    }
    fs::write(dir.join("summary.json"), serde_json::to_vec_pretty(&output.summary)?)?;
    Ok((dir, output.summary))
}
