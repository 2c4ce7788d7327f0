//! Aggregation pipeline: trial records in, report bundle out. Targets are
//! read at the target fraction of the budget, per-seed times to target are
//! medianed into timing tables, and the tables integrate into scores.

use crate::plot::render_profiles_svg;
use crate::util::{atomic_write, to_pretty_json};
use optprofiler_core::error::{Error, Result};
use optprofiler_core::protocol::{
    median_time, set_target, time_to_target, training_quality, Condition, Target, TimeOrInf,
    TrialRecord,
};
use optprofiler_core::scoring::{score_table, ScoreReport, TimingTable};
use optprofiler_core::workloads::Direction;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

/// Metrics targeted per split; every bundled workload reports both.
pub const TRAIN_METRIC: &str = "train_loss";
pub const VALIDATION_METRIC: &str = "validation_loss";

#[derive(Debug, Clone, Serialize)]
pub struct QualityRow {
    pub workload: String,
    pub algorithm: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Serialize)]
pub struct ScoreBundle {
    pub condition: Condition,
    pub r_max: f64,
    pub targets: Vec<Target>,
    pub quality: Vec<QualityRow>,
    #[serde(skip)]
    pub timing: BTreeMap<String, TimingTable>,
    pub reports: BTreeMap<String, ScoreReport>,
}

fn grid(records: &[TrialRecord]) -> Result<(Vec<String>, Vec<String>)> {
    let workloads: BTreeSet<_> = records.iter().map(|r| r.workload.clone()).collect();
    let algorithms: BTreeSet<_> = records.iter().map(|r| r.algorithm.clone()).collect();
    for w in &workloads {
        for a in &algorithms {
            if !records.iter().any(|r| &r.workload == w && &r.algorithm == a) {
                return Err(Error::Structure {
                    expected: format!("trials for every cell of the grid, including {w}/{a}"),
                    actual: format!("{w}/{a} missing"),
                });
            }
        }
    }
    Ok((
        workloads.into_iter().collect(),
        algorithms.into_iter().collect(),
    ))
}

pub fn score_records(
    records: &[TrialRecord],
    target_fraction: f64,
    r_max: f64,
) -> Result<ScoreBundle> {
    if records.is_empty() {
        return Err(Error::protocol("no trial records to score"));
    }
    let condition = records[0].budget.condition;
    for r in records {
        if r.budget.condition != condition {
            return Err(Error::protocol(format!(
                "mixed conditions in one scoring call: {}/{} seed {} is {} among {} records",
                r.workload,
                r.algorithm,
                r.seed,
                r.budget.condition.name(),
                condition.name()
            )));
        }
    }
    let (workloads, algorithms) = grid(records)?;

    let mut targets = Vec::new();
    let mut quality = Vec::new();
    let mut timing = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for (split, metric) in [("train", TRAIN_METRIC), ("validation", VALIDATION_METRIC)] {
        let mut entries = BTreeMap::new();
        for w in &workloads {
            let target = set_target(records, w, target_fraction, metric, Direction::Minimize)?;
            let of_workload: Vec<&TrialRecord> =
                records.iter().filter(|r| &r.workload == w).collect();
            for a in &algorithms {
                let times: Vec<TimeOrInf> = of_workload
                    .iter()
                    .filter(|r| &r.algorithm == a)
                    .map(|r| time_to_target(r, &target))
                    .collect();
                entries.insert((a.clone(), w.clone()), median_time(&times)?);
            }
            targets.push(target);

            let owned: Vec<TrialRecord> = of_workload.iter().map(|r| (*r).clone()).collect();
            let stats = training_quality(&owned, &owned[0].budget, metric)?;
            for (a, (mean, std)) in stats {
                quality.push(QualityRow {
                    workload: w.clone(),
                    algorithm: a,
                    metric: metric.to_string(),
                    mean,
                    std,
                });
            }
        }
        let table = TimingTable::new(algorithms.clone(), workloads.clone(), entries)?;
        reports.insert(split.to_string(), score_table(&table, r_max)?);
        timing.insert(split.to_string(), table);
    }
    targets.sort_by(|a, b| (&a.workload, &a.metric).cmp(&(&b.workload, &b.metric)));
    quality.sort_by(|a, b| {
        (&a.workload, &a.algorithm, &a.metric).cmp(&(&b.workload, &b.algorithm, &b.metric))
    });
    Ok(ScoreBundle {
        condition,
        r_max,
        targets,
        quality,
        timing,
        reports,
    })
}

fn quality_csv(rows: &[QualityRow]) -> String {
    let mut out = String::from("workload,algorithm,metric,mean,std,display\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.4} ± {:.5}\n",
            r.workload, r.algorithm, r.metric, r.mean, r.std, r.mean, r.std
        ));
    }
    out
}

pub fn summary_text(bundle: &ScoreBundle) -> String {
    let mut out = format!(
        "condition: {}   r_max: {}\n\ntargets:\n",
        bundle.condition.name(),
        bundle.r_max
    );
    for t in &bundle.targets {
        out.push_str(&format!(
            "  {:<14} {:<18} {:>12.6}  (set by {})\n",
            t.workload, t.metric, t.value, t.source_algorithm
        ));
    }
    out.push_str("\nscores:\n");
    let columns: Vec<(String, &ScoreReport)> = bundle
        .reports
        .iter()
        .map(|(name, report)| (name.clone(), report))
        .collect();
    for line in optprofiler_core::scoring::score_matrix_text(&columns).lines() {
        out.push_str("  ");
        out.push_str(line);
        out.push('\n');
    }
    let warnings: Vec<&String> = bundle
        .reports
        .values()
        .flat_map(|r| r.warnings.iter())
        .collect();
    if !warnings.is_empty() {
        out.push_str("\nwarnings:\n");
        for w in warnings {
            out.push_str(&format!("  {w}\n"));
        }
    }
    out
}

/// Emit every artifact of the bundle; returns the written paths.
pub fn write_bundle(bundle: &ScoreBundle, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = out.join(name);
        atomic_write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    emit("targets.json", to_pretty_json(&bundle.targets)?.as_bytes())?;
    emit("quality.csv", quality_csv(&bundle.quality).as_bytes())?;
    for (split, table) in &bundle.timing {
        emit(
            &format!("timing_{split}.csv"),
            table.to_csv_string().as_bytes(),
        )?;
    }
    #[derive(Serialize)]
    struct ScoresFile<'a> {
        condition: &'a str,
        r_max: f64,
        reports: &'a BTreeMap<String, ScoreReport>,
    }
    emit(
        "scores.json",
        to_pretty_json(&ScoresFile {
            condition: bundle.condition.name(),
            r_max: bundle.r_max,
            reports: &bundle.reports,
        })?
        .as_bytes(),
    )?;
    emit("summary.txt", summary_text(bundle).as_bytes())?;
    for (split, report) in &bundle.reports {
        let title = format!("{} targets, {} condition", split, bundle.condition.name());
        emit(
            &format!("profiles_{split}.svg"),
            render_profiles_svg(&title, &report.profiles, bundle.r_max).as_bytes(),
        )?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::runner::cmd_run;
    use optprofiler_core::protocol::read_all_records;

    fn run_small_grid(dir: &Path) -> Vec<TrialRecord> {
        let toml_text = r#"
seeds = [0, 1, 2]
eval_every = 10
condition = "step"

[[workloads]]
kind = "quadratic"
id = "quad"
dim = 4
spectrum = { min = 0.5, max = 2.0 }
step_hint = 120

[workloads.budget]
max_steps = 120
sec_per_step = 0.01

[[workloads]]
kind = "logreg"
id = "logreg"
dim = 5
n_samples = 80
batch_size = 16
separation = 4.0
step_hint = 120

[workloads.budget]
max_steps = 120
sec_per_step = 0.02

[[algorithms]]
kind = "baseline"
name = "adam"

[[algorithms]]
kind = "baseline"
name = "nesterov"
"#;
        let cfg: RunConfig = toml::from_str(toml_text).unwrap();
        cmd_run(&cfg, dir, None).unwrap();
        read_all_records(dir).unwrap()
    }

    #[test]
    fn bundle_is_complete_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let records = run_small_grid(dir.path());
        assert_eq!(records.len(), 12);

        let bundle = score_records(&records, 0.75, 1.5).unwrap();
        assert_eq!(bundle.targets.len(), 4, "two workloads x two splits");
        assert_eq!(bundle.reports.len(), 2);
        for report in bundle.reports.values() {
            for s in report.scores.values() {
                assert!((0.0..=1.0).contains(s));
            }
        }

        let out1 = tempfile::tempdir().unwrap();
        let out2 = tempfile::tempdir().unwrap();
        let paths1 = write_bundle(&bundle, out1.path()).unwrap();
        let bundle2 = score_records(&records, 0.75, 1.5).unwrap();
        let paths2 = write_bundle(&bundle2, out2.path()).unwrap();
        assert_eq!(paths1.len(), paths2.len());
        for (a, b) in paths1.iter().zip(paths2.iter()) {
            let ba = std::fs::read(a).unwrap();
            let bb = std::fs::read(b).unwrap();
            assert_eq!(ba, bb, "{} differs between runs", a.display());
        }
    }

    #[test]
    fn incomplete_grid_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let records = run_small_grid(dir.path());
        let partial: Vec<TrialRecord> = records
            .into_iter()
            .filter(|r| !(r.workload == "quad" && r.algorithm == "nesterov"))
            .collect();
        assert!(matches!(
            score_records(&partial, 0.75, 1.5),
            Err(Error::Structure { .. })
        ));
    }

    #[test]
    fn mixed_conditions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut records = run_small_grid(dir.path());
        records[0].budget =
            optprofiler_core::protocol::Budget::time_control(1.0, records[0].budget.clock);
        let err = score_records(&records, 0.75, 1.5).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
    }
}
