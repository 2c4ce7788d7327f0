//! Performance ratios, profiles, and integrated benchmark scores.
//!
//! Given a table of median times (or steps) to target, each algorithm's
//! ratio on a workload is its time over the fastest algorithm's time. The
//! profile ρ(τ) counts the fraction of workloads with ratio ≤ τ, and the
//! score is the exact integral of ρ over [1, r_max], normalized by r_max−1.

use crate::error::{Error, Result};
use crate::protocol::TimeOrInf;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Median time/steps-to-target per (algorithm, workload), with explicit
/// ordering so emitted tables are stable.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingTable {
    algorithms: Vec<String>,
    workloads: Vec<String>,
    entries: BTreeMap<(String, String), TimeOrInf>,
}

impl TimingTable {
    pub fn new(
        algorithms: Vec<String>,
        workloads: Vec<String>,
        entries: BTreeMap<(String, String), TimeOrInf>,
    ) -> Result<Self> {
        if algorithms.is_empty() || workloads.is_empty() {
            return Err(Error::config("timing table needs at least one algorithm and workload"));
        }
        let unique_a: BTreeSet<_> = algorithms.iter().collect();
        let unique_w: BTreeSet<_> = workloads.iter().collect();
        if unique_a.len() != algorithms.len() {
            return Err(Error::config("duplicate algorithm in timing table"));
        }
        if unique_w.len() != workloads.len() {
            return Err(Error::config("duplicate workload in timing table"));
        }
        for a in &algorithms {
            for w in &workloads {
                match entries.get(&(a.clone(), w.clone())) {
                    None => {
                        return Err(Error::Structure {
                            expected: format!("entry for ({a}, {w})"),
                            actual: "missing".to_string(),
                        })
                    }
                    Some(TimeOrInf::Finite(v)) if !(*v > 0.0) => {
                        return Err(Error::Config(format!(
                            "({a}, {w}): times must be positive, got {v}"
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(Self {
            algorithms,
            workloads,
            entries,
        })
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn workloads(&self) -> &[String] {
        &self.workloads
    }

    pub fn get(&self, algorithm: &str, workload: &str) -> Option<TimeOrInf> {
        self.entries
            .get(&(algorithm.to_string(), workload.to_string()))
            .copied()
    }

    /// Fastest finite time on a workload across all algorithms.
    pub fn min_time(&self, workload: &str) -> Option<f64> {
        self.algorithms
            .iter()
            .filter_map(|a| self.get(a, workload)?.finite())
            .fold(None, |acc, v| Some(acc.map_or(v, |m: f64| m.min(v))))
    }

    /// CSV form: header of workloads, one row per algorithm, "inf" literals.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("algorithm");
        for w in &self.workloads {
            out.push(',');
            out.push_str(w);
        }
        out.push('\n');
        for a in &self.algorithms {
            out.push_str(a);
            for w in &self.workloads {
                out.push(',');
                out.push_str(&self.get(a, w).expect("validated complete").to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Parse a timing CSV: header row of workloads, one row per algorithm,
/// cells positive numbers or the literal "inf".
pub fn ingest_timing_table(path: &Path) -> Result<TimingTable> {
    let text = std::fs::read_to_string(path)?;
    parse_timing_csv(&text)
}

pub fn parse_timing_csv(text: &str) -> Result<TimingTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i,
            col: 0,
            message: e.to_string(),
        })?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 0,
            col: 0,
            message: "empty timing table".to_string(),
        });
    }
    let header = &rows[0];
    if header.len() < 2 {
        return Err(Error::Parse {
            row: 0,
            col: 0,
            message: "header must list at least one workload".to_string(),
        });
    }
    let workloads: Vec<String> = header[1..].to_vec();
    if rows.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            col: 0,
            message: "timing table has no algorithm rows".to_string(),
        });
    }

    let mut algorithms = Vec::new();
    let mut entries = BTreeMap::new();
    for (i, row) in rows.iter().enumerate().skip(1) {
        if row.len() != workloads.len() + 1 {
            return Err(Error::Parse {
                row: i,
                col: row.len(),
                message: format!(
                    "expected {} cells (algorithm + {} workloads), found {}",
                    workloads.len() + 1,
                    workloads.len(),
                    row.len()
                ),
            });
        }
        let algorithm = row[0].clone();
        if algorithms.contains(&algorithm) {
            return Err(Error::Parse {
                row: i,
                col: 0,
                message: format!("duplicate algorithm '{algorithm}'"),
            });
        }
        for (j, cell) in row[1..].iter().enumerate() {
            let value: TimeOrInf = cell.parse().map_err(|_| Error::Parse {
                row: i,
                col: j + 1,
                message: format!("'{cell}' is not a number or \"inf\""),
            })?;
            if let TimeOrInf::Finite(v) = value {
                if !(v > 0.0) {
                    return Err(Error::Parse {
                        row: i,
                        col: j + 1,
                        message: format!("times must be positive, got {v}"),
                    });
                }
            }
            entries.insert((algorithm.clone(), workloads[j].clone()), value);
        }
        algorithms.push(algorithm);
    }
    TimingTable::new(algorithms, workloads, entries)
}

/// t_{â,w} over the fastest algorithm's time on w (the scored algorithm is
/// part of the minimum pool). Infinite when the algorithm timed out, or when
/// every algorithm did.
pub fn performance_ratio(table: &TimingTable, algorithm: &str, workload: &str) -> Result<TimeOrInf> {
    let own = table.get(algorithm, workload).ok_or_else(|| {
        Error::Config(format!("({algorithm}, {workload}) not present in timing table"))
    })?;
    let min = match table.min_time(workload) {
        Some(m) => m,
        None => return Ok(TimeOrInf::Inf),
    };
    Ok(match own {
        TimeOrInf::Inf => TimeOrInf::Inf,
        TimeOrInf::Finite(t) => TimeOrInf::Finite(t / min),
    })
}

/// Right-continuous step function ρ(τ) with breakpoints at the observed
/// ratios; infinite ratios never count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub algorithm: String,
    /// (τ, ρ(τ)) pairs, τ ascending, starting at τ = 1.
    pub breakpoints: Vec<(f64, f64)>,
    pub n_workloads: usize,
}

pub fn performance_profile(algorithm: &str, ratios: &[TimeOrInf]) -> Result<Profile> {
    if ratios.is_empty() {
        return Err(Error::Precondition("profile needs at least one workload".to_string()));
    }
    let n = ratios.len() as f64;
    let mut finite: Vec<f64> = ratios.iter().filter_map(|r| r.finite()).collect();
    finite.sort_by(|a, b| a.total_cmp(b));
    let mut breakpoints = vec![(1.0, 0.0)];
    let mut count = 0usize;
    for r in finite {
        count += 1;
        let rho = count as f64 / n;
        if r <= 1.0 {
            breakpoints[0].1 = rho;
        } else if let Some(last) = breakpoints.last_mut().filter(|(tau, _)| *tau == r) {
            last.1 = rho;
        } else {
            breakpoints.push((r, rho));
        }
    }
    Ok(Profile {
        algorithm: algorithm.to_string(),
        breakpoints,
        n_workloads: ratios.len(),
    })
}

impl Profile {
    pub fn rho(&self, tau: f64) -> f64 {
        let mut value = 0.0;
        for (t, r) in &self.breakpoints {
            if *t <= tau {
                value = *r;
            } else {
                break;
            }
        }
        value
    }
}

/// Exact step-function integral of ρ over [1, r_max], normalized by
/// r_max − 1 and clipped to [0, 1].
pub fn benchmark_score(profile: &Profile, r_max: f64) -> Result<f64> {
    if !(r_max > 1.0) || !r_max.is_finite() {
        return Err(Error::Precondition(format!("r_max must be > 1, got {r_max}")));
    }
    let mut integral = 0.0;
    for (k, (tau, rho)) in profile.breakpoints.iter().enumerate() {
        if *tau >= r_max {
            break;
        }
        let next_tau = profile
            .breakpoints
            .get(k + 1)
            .map(|(t, _)| *t)
            .unwrap_or(f64::INFINITY);
        integral += rho * (next_tau.min(r_max) - tau);
    }
    Ok((integral / (r_max - 1.0)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub r_max: f64,
    pub scores: BTreeMap<String, f64>,
    /// algorithm → workload → performance ratio
    pub ratios: BTreeMap<String, BTreeMap<String, TimeOrInf>>,
    #[serde(skip)]
    pub profiles: Vec<Profile>,
    pub warnings: Vec<String>,
}

/// Ratios, profiles, and integrated scores for every algorithm in the table.
pub fn score_table(table: &TimingTable, r_max: f64) -> Result<ScoreReport> {
    if !(r_max > 1.0) || !r_max.is_finite() {
        return Err(Error::Precondition(format!("r_max must be > 1, got {r_max}")));
    }
    let mut warnings = Vec::new();
    for w in table.workloads() {
        if table.min_time(w).is_none() {
            warnings.push(format!(
                "workload '{w}': every algorithm timed out; all ratios are infinite"
            ));
        }
    }
    let mut scores = BTreeMap::new();
    let mut ratios = BTreeMap::new();
    let mut profiles = Vec::new();
    for a in table.algorithms() {
        let mut per_workload = BTreeMap::new();
        let mut ordered = Vec::with_capacity(table.workloads().len());
        for w in table.workloads() {
            let r = performance_ratio(table, a, w)?;
            per_workload.insert(w.clone(), r);
            ordered.push(r);
        }
        let profile = performance_profile(a, &ordered)?;
        let score = benchmark_score(&profile, r_max)?;
        scores.insert(a.clone(), score);
        ratios.insert(a.clone(), per_workload);
        profiles.push(profile);
    }
    Ok(ScoreReport {
        r_max,
        scores,
        ratios,
        profiles,
        warnings,
    })
}

/// Aligned text table: one row per algorithm, one score column per report.
pub fn score_matrix_text(columns: &[(String, &ScoreReport)]) -> String {
    let mut algorithms: BTreeSet<String> = BTreeSet::new();
    for (_, report) in columns {
        algorithms.extend(report.scores.keys().cloned());
    }
    let name_width = algorithms
        .iter()
        .map(|a| a.len())
        .chain(["optimizer".len()])
        .max()
        .unwrap_or(9);
    let widths: Vec<usize> = columns.iter().map(|(t, _)| t.len().max(4)).collect();
    let mut out = format!("{:<name_width$}", "optimizer");
    for ((title, _), w) in columns.iter().zip(&widths) {
        out.push_str(&format!("  {title:>w$}"));
    }
    out.push('\n');
    for a in &algorithms {
        out.push_str(&format!("{a:<name_width$}"));
        for ((_, report), w) in columns.iter().zip(&widths) {
            match report.scores.get(a) {
                Some(s) => out.push_str(&format!("  {s:>w$.2}")),
                None => out.push_str(&format!("  {:>w$}", "-")),
            }
        }
        out.push('\n');
    }
    out
}
