//! Trial records and their JSON-lines persistence.
//!
//! One file per trial at `<workload>/<algorithm>/seed<k>.jsonl`: a header
//! line with the trial identity and budget, then one line per metric sample.

use super::budget::Budget;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: u64,
    pub elapsed_sec: f64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordHeader {
    algorithm: String,
    workload: String,
    seed: u64,
    budget: Budget,
    config_hash: String,
    completed_steps: u64,
    wall_clock_total: f64,
    failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub algorithm: String,
    pub workload: String,
    pub seed: u64,
    pub budget: Budget,
    pub config_hash: String,
    pub samples: Vec<Sample>,
    pub completed_steps: u64,
    pub wall_clock_total: f64,
    /// Set when a numeric error truncated the run; the trial counts as never
    /// reaching any target.
    pub failed: bool,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        let mut prev_step = None;
        let mut prev_elapsed = f64::NEG_INFINITY;
        for s in &self.samples {
            if let Some(p) = prev_step {
                if s.step <= p {
                    return Err(Error::protocol(format!(
                        "samples must be strictly increasing in step ({p} then {})",
                        s.step
                    )));
                }
            }
            if s.elapsed_sec <= prev_elapsed {
                return Err(Error::protocol(format!(
                    "samples must be strictly increasing in elapsed_sec ({prev_elapsed} then {})",
                    s.elapsed_sec
                )));
            }
            prev_step = Some(s.step);
            prev_elapsed = s.elapsed_sec;
        }
        Ok(())
    }

    /// Canonical location of this trial under an output root.
    pub fn relative_path(&self) -> PathBuf {
        record_path(&self.workload, &self.algorithm, self.seed)
    }

    pub fn final_sample(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

pub fn record_path(workload: &str, algorithm: &str, seed: u64) -> PathBuf {
    PathBuf::from(workload)
        .join(algorithm)
        .join(format!("seed{seed}.jsonl"))
}

pub fn write_trial_record(root: &Path, record: &TrialRecord) -> Result<PathBuf> {
    record.validate()?;
    let path = root.join(record.relative_path());
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let header = RecordHeader {
        algorithm: record.algorithm.clone(),
        workload: record.workload.clone(),
        seed: record.seed,
        budget: record.budget.clone(),
        config_hash: record.config_hash.clone(),
        completed_steps: record.completed_steps,
        wall_clock_total: record.wall_clock_total,
        failed: record.failed,
    };
    let mut buf = serde_json::to_vec(&header)?;
    buf.push(b'\n');
    for sample in &record.samples {
        buf.extend_from_slice(&serde_json::to_vec(sample)?);
        buf.push(b'\n');
    }
    // temp-file-and-rename so a concurrent reader never sees half a trial
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

pub fn read_trial_record(path: &Path) -> Result<TrialRecord> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header_line = lines.next().ok_or_else(|| Error::Parse {
        row: 0,
        col: 0,
        message: format!("{}: empty record file", path.display()),
    })?;
    let header: RecordHeader = serde_json::from_str(header_line)?;
    let mut samples = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str::<Sample>(line)?);
    }
    let record = TrialRecord {
        algorithm: header.algorithm,
        workload: header.workload,
        seed: header.seed,
        budget: header.budget,
        config_hash: header.config_hash,
        samples,
        completed_steps: header.completed_steps,
        wall_clock_total: header.wall_clock_total,
        failed: header.failed,
    };
    record.validate()?;
    Ok(record)
}

/// All records under a root, sorted by (workload, algorithm, seed) so
/// downstream aggregation is order-independent of directory listing.
pub fn read_all_records(root: &Path) -> Result<Vec<TrialRecord>> {
    let mut records = Vec::new();
    if !root.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("records directory {} does not exist", root.display()),
        )));
    }
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
                records.push(read_trial_record(&path)?);
            }
        }
    }
    records.sort_by(|a, b| {
        (&a.workload, &a.algorithm, a.seed).cmp(&(&b.workload, &b.algorithm, b.seed))
    });
    Ok(records)
}
