//! Run artifacts. Every file is written atomically (temp sibling + rename)
//! so an interrupted run never leaves a half-written result, and all
//! formatting is plain `{}` so reruns of a deterministic computation are
//! byte-identical.

use crate::config::ResolvedParameters;
use crate::CliError;
use num_complex::Complex64;
use pcs_core::trainer::TrainingResult;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// Self-contained record of one `optimize` run.
#[derive(Debug, Serialize)]
pub struct ResultFile<'a> {
    pub schema_version: u32,
    /// Seed actually used (a `--seed` override replaces the config value).
    pub seed: u64,
    pub restarts: usize,
    /// Generator stream of the restart that won.
    pub chosen_stream: u64,
    pub parameters: &'a ResolvedParameters,
    pub result: &'a TrainingResult,
}

/// Read-side mirror of [`ResultFile`]. Records are read back as raw
/// numbers so a hand-edited distribution still parses and reaches the
/// numerical checks instead of dying as a malformed file.
#[derive(Debug, Deserialize)]
pub struct StoredResultFile {
    pub schema_version: u32,
    pub seed: u64,
    #[allow(dead_code)]
    pub restarts: usize,
    pub chosen_stream: u64,
    pub parameters: ResolvedParameters,
    pub result: StoredTrainingResult,
}

#[derive(Debug, Deserialize)]
pub struct StoredTrainingResult {
    pub distribution: Vec<f64>,
    pub epoch_records: Vec<StoredEpochRecord>,
    #[serde(default)]
    #[allow(dead_code)]
    pub batch_records: Vec<StoredBatchRecord>,
}

#[derive(Debug, Deserialize)]
pub struct StoredEpochRecord {
    #[allow(dead_code)]
    pub epoch: usize,
    pub mean_rate: f64,
    #[allow(dead_code)]
    pub distribution: Vec<f64>,
}

#[derive(Debug, Deserialize)]
pub struct StoredBatchRecord {
    #[allow(dead_code)]
    pub epoch: usize,
    #[allow(dead_code)]
    pub batch: usize,
    #[allow(dead_code)]
    pub rate: f64,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Io(format!("cannot move {} into place: {e}", tmp.display())))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Io(format!("cannot serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_result_file(path: &Path) -> Result<StoredResultFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let stored: StoredResultFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("malformed result file {}: {e}", path.display())))?;
    if stored.schema_version != RESULT_SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "result file {} has schema_version {} (this build reads {RESULT_SCHEMA_VERSION})",
            path.display(),
            stored.schema_version
        )));
    }
    Ok(stored)
}

/// `epoch,batch,rate` — one row per training batch, in training order.
pub fn trace_csv(result: &TrainingResult) -> String {
    let mut out = String::from("epoch,batch,rate\n");
    for record in &result.batch_records {
        let _ = writeln!(out, "{},{},{}", record.epoch, record.batch, record.rate);
    }
    out
}

/// `index,re,im,p` — unscaled constellation points with their learned
/// probabilities. Power normalization depends on the distribution, so
/// consumers rescale per their constraint; the raw geometry is stable.
pub fn distribution_csv(points: &[Complex64], p: &[f64]) -> String {
    let mut out = String::from("index,re,im,p\n");
    for (index, (point, prob)) in points.iter().zip(p).enumerate() {
        let _ = writeln!(out, "{},{},{},{}", index, point.re, point.im, prob);
    }
    out
}

/// Assembles a CSV from a header and preformatted rows.
pub fn csv_document(header: &str, rows: &[String]) -> String {
    let mut out = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}
