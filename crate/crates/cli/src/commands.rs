//! Command implementations behind the `ergodic` binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ergodic_core::io::{read_snapshot, write_pgm};
use ergodic_core::{run, SimConfig};

use crate::error::{CliError, CliResult};
use crate::output::{summary_text, write_artifacts};
use crate::scenario::ScenarioFile;
use crate::sweep::{run_sweep, ComparisonRow, SweepSpec};

pub const DEFAULT_OUTPUT_DIR: &str = "output";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub snapshot_every: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Loads a scenario and returns the validated config with its output directory.
pub fn validate(path: &Path) -> CliResult<(SimConfig, PathBuf)> {
    let file = ScenarioFile::load(path)?;
    let config = file.to_config()?;
    let out = file
        .run
        .output_dir
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    Ok((config, out))
}

/// Runs a scenario and writes its artifacts. A run that fails part way still
/// writes what it produced before reporting the failure.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> CliResult<String> {
    let (mut config, out) = validate(path)?;
    if opts.snapshot_every.is_some() {
        config.snapshot_every = opts.snapshot_every;
        config.validate()?;
    }
    let out = opts.out.clone().unwrap_or(out);
    match run(config) {
        Ok(result) => {
            write_artifacts(&out, &result)?;
            Ok(summary_text(&result))
        }
        Err(e) => {
            write_artifacts(&out, &e.partial)?;
            Err(CliError::Runtime(e.error.to_string()))
        }
    }
}

pub fn sweep(path: &Path) -> CliResult<Vec<ComparisonRow>> {
    let spec = SweepSpec::load(path)?;
    let out = if spec.output_dir.is_absolute() {
        spec.output_dir.clone()
    } else {
        path.parent()
            .unwrap_or(Path::new("."))
            .join(&spec.output_dir)
    };
    run_sweep(&spec, &out)
}

pub fn export_heatmap(snapshot: &Path, out: &Path) -> CliResult<()> {
    let file = File::open(snapshot).map_err(|e| CliError::io(snapshot, e))?;
    let field = read_snapshot(BufReader::new(file))
        .map_err(|e| CliError::Validation(format!("{}: {e}", snapshot.display())))?;
    let file = File::create(out).map_err(|e| CliError::io(out, e))?;
    let mut w = BufWriter::new(file);
    write_pgm(&mut w, &field).map_err(|e| CliError::io(out, e))?;
    w.flush().map_err(|e| CliError::io(out, e))
}
