//! Writing run artifacts to an output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ergodic_core::io::{write_metrics, write_segments, write_snapshot, write_trajectories};
use ergodic_core::RunResult;

use crate::error::{CliError, CliResult};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const SEGMENTS_FILE: &str = "segments.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const SNAPSHOT_DIR: &str = "snapshots";

pub fn snapshot_name(k: u64) -> String {
    format!("phi_{k:06}.esf")
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> ergodic_core::Result<()>,
) -> CliResult<()> {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn summary_text(result: &RunResult) -> String {
    let last = result.metrics.last();
    let completed = result.segments.iter().filter(|s| s.is_complete()).count();
    let mut s = String::new();
    s.push_str(&format!("final_k = {}\n", last.map_or(0, |m| m.k)));
    s.push_str(&format!("final_V = {}\n", last.map_or(f64::NAN, |m| m.v)));
    s.push_str(&format!("integral_V = {}\n", result.integral_v));
    s.push_str(&format!("segments = {}\n", result.segments.len()));
    s.push_str(&format!("completed_segments = {completed}\n"));
    if let Some((lo, hi)) = result.r_range {
        s.push_str(&format!("r_min = {lo}\nr_max = {hi}\n"));
    }
    s
}

/// Writes every artifact of `result` into `dir`, creating it if needed.
/// Returns the paths written.
pub fn write_artifacts(dir: &Path, result: &RunResult) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join(METRICS_FILE);
    write_file(&path, |w| write_metrics(w, &result.metrics))?;
    written.push(path);
    let path = dir.join(TRAJECTORIES_FILE);
    write_file(&path, |w| write_trajectories(w, &result.trajectories))?;
    written.push(path);
    let path = dir.join(SEGMENTS_FILE);
    write_file(&path, |w| write_segments(w, &result.segments))?;
    written.push(path);

    if !result.snapshots.is_empty() {
        let snap_dir = dir.join(SNAPSHOT_DIR);
        std::fs::create_dir_all(&snap_dir).map_err(|e| CliError::io(&snap_dir, e))?;
        for snap in &result.snapshots {
            let path = snap_dir.join(snapshot_name(snap.k));
            write_file(&path, |w| write_snapshot(w, &snap.phi))?;
            written.push(path);
        }
    }

    let path = dir.join(SUMMARY_FILE);
    std::fs::write(&path, summary_text(result)).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
