//! Budget transfer onto the current machine. A short pilot run measures
//! local time per step; the reference runtime then scales by the speed ratio.

use crate::config::RunConfig;
use crate::runner::{baseline_hp, WORKLOAD_DATA_SEED};
use crate::util::{atomic_write, to_pretty_json};
use optprofiler_core::error::{Error, Result};
use optprofiler_core::protocol::{
    run_trial, transfer_budget, AlgorithmSpec, Budget, Clock, HardwareCalibration,
};
use optprofiler_core::workloads::make_workload;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Pilots shorter than this cannot give a stable time-per-step estimate.
pub const MIN_PILOT_STEPS: u64 = 10;

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceRow {
    pub workload: String,
    pub optimizer: String,
    pub reference_steps: u64,
    pub reference_runtime_sec: f64,
}

pub fn read_reference_table(path: &Path) -> Result<Vec<ReferenceRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<ReferenceRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            row: i + 1,
            col: 0,
            message: e.to_string(),
        })?;
        if row.reference_steps == 0 || !(row.reference_runtime_sec > 0.0) {
            return Err(Error::Parse {
                row: i + 1,
                col: 2,
                message: format!(
                    "reference steps and runtime must be positive, got {} / {}",
                    row.reference_steps, row.reference_runtime_sec
                ),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::config(format!(
            "{}: reference table has no rows",
            path.display()
        )));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationOutcome {
    pub workload: String,
    pub optimizer: String,
    pub reference_steps: u64,
    pub reference_runtime_sec: f64,
    pub pilot_steps: u64,
    pub pilot_seconds: f64,
    pub reference_time_per_step: f64,
    pub local_time_per_step: f64,
    pub transferred_budget_sec: f64,
}

pub fn cmd_calibrate(
    config: &RunConfig,
    reference_path: &Path,
    pilot_fraction: f64,
    clock_override: Option<f64>,
    out: &Path,
) -> Result<Vec<CalibrationOutcome>> {
    if !(pilot_fraction > 0.0 && pilot_fraction <= 1.0) {
        return Err(Error::config(format!(
            "pilot fraction must be in (0, 1], got {pilot_fraction}"
        )));
    }
    let rows = read_reference_table(reference_path)?;
    let mut outcomes = Vec::new();
    for row in &rows {
        let entry = config.workload(&row.workload).ok_or_else(|| {
            Error::Config(format!(
                "reference row '{}' names a workload absent from the config",
                row.workload
            ))
        })?;
        let pilot_steps = (row.reference_steps as f64 * pilot_fraction).floor() as u64;
        if pilot_steps < MIN_PILOT_STEPS {
            return Err(Error::Precondition(format!(
                "{}: pilot of {pilot_steps} steps ({} x {pilot_fraction}) is below the \
                 {MIN_PILOT_STEPS}-step floor; raise the pilot fraction",
                row.workload, row.reference_steps
            )));
        }
        let clock = match clock_override.or(entry.budget.sec_per_step) {
            Some(sec_per_step) => Clock::Simulated { sec_per_step },
            None => Clock::Real,
        };
        let workload = make_workload(&entry.workload, WORKLOAD_DATA_SEED)?;
        let spec = AlgorithmSpec::Baseline {
            name: row.optimizer.clone(),
            hp: baseline_hp(&row.optimizer, None, workload.step_hint())?,
        };
        let budget = Budget::step_control(pilot_steps, clock);
        let record = run_trial(
            &spec,
            workload.as_ref(),
            &budget,
            config.seeds[0],
            pilot_steps,
            "calibration",
        )?;
        if record.completed_steps == 0 || !(record.wall_clock_total > 0.0) {
            return Err(Error::Estimation(format!(
                "{}: pilot finished {} steps in {} s, cannot estimate time per step",
                row.workload, record.completed_steps, record.wall_clock_total
            )));
        }
        let calib = HardwareCalibration {
            reference_time_per_step: row.reference_runtime_sec / row.reference_steps as f64,
            local_time_per_step: record.wall_clock_total / record.completed_steps as f64,
            pilot_steps: record.completed_steps,
        };
        outcomes.push(CalibrationOutcome {
            workload: row.workload.clone(),
            optimizer: row.optimizer.clone(),
            reference_steps: row.reference_steps,
            reference_runtime_sec: row.reference_runtime_sec,
            pilot_steps: record.completed_steps,
            pilot_seconds: record.wall_clock_total,
            reference_time_per_step: calib.reference_time_per_step,
            local_time_per_step: calib.local_time_per_step,
            transferred_budget_sec: transfer_budget(row.reference_runtime_sec, &calib)?,
        });
    }
    atomic_write(
        &out.join("calibration.json"),
        to_pretty_json(&outcomes)?.as_bytes(),
    )?;
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        toml::from_str(
            r#"
seeds = [0]
condition = "step"

[[workloads]]
kind = "quadratic"
id = "quad"
dim = 4
spectrum = { min = 0.5, max = 2.0 }
step_hint = 1000

[workloads.budget]
max_steps = 1000
sec_per_step = 0.01

[[algorithms]]
kind = "baseline"
name = "adam"
"#,
        )
        .unwrap()
    }

    fn reference_csv(dir: &Path, body: &str) -> std::path::PathBuf {
        let path = dir.join("reference.csv");
        std::fs::write(
            &path,
            format!("workload,optimizer,reference_steps,reference_runtime_sec\n{body}"),
        )
        .unwrap();
        path
    }

    #[test]
    fn simulated_pilot_transfers_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = reference_csv(dir.path(), "quad,adam,1000,250.0\n");
        let outcomes = cmd_calibrate(&config(), &path, 0.05, None, dir.path()).unwrap();
        assert_eq!(outcomes.len(), 1);
        let o = &outcomes[0];
        assert_eq!(o.pilot_steps, 50);
        // Simulated clock: local tps is exactly 0.01, reference tps 0.25.
        assert!((o.local_time_per_step - 0.01).abs() < 1e-12);
        assert_eq!(o.transferred_budget_sec, (250.0f64 * (0.01 / 0.25)).floor());
        assert!(dir.path().join("calibration.json").exists());
    }

    #[test]
    fn short_pilot_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = reference_csv(dir.path(), "quad,adam,100,25.0\n");
        let err = cmd_calibrate(&config(), &path, 0.05, None, dir.path()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");
        assert!(!dir.path().join("calibration.json").exists());
    }

    #[test]
    fn unknown_workload_and_bad_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let missing = reference_csv(dir.path(), "mlp,adam,1000,250.0\n");
        assert!(matches!(
            cmd_calibrate(&config(), &missing, 0.05, None, dir.path()),
            Err(Error::Config(_))
        ));
        let bad = reference_csv(dir.path(), "quad,adam,0,250.0\n");
        assert!(matches!(
            read_reference_table(&bad),
            Err(Error::Parse { row: 1, .. })
        ));
    }
}
