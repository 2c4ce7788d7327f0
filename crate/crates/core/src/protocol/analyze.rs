//! Target setting and time/steps-to-target extraction from trial records.
//!
//! The pipeline: measure every algorithm at 75% of the budget, take each
//! algorithm's median over trials, let the best median define the workload
//! target, then ask how long every trial took to first reach that target.
//! Trials that never get there yield an infinite sentinel.

use super::budget::{Budget, Condition};
use super::record::TrialRecord;
use crate::error::{Error, Result};
use crate::workloads::Direction;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Elapsed seconds or steps, with "never" as an explicit infinite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeOrInf {
    Finite(f64),
    Inf,
}

impl TimeOrInf {
    pub fn is_finite(&self) -> bool {
        matches!(self, TimeOrInf::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            TimeOrInf::Finite(v) => Some(*v),
            TimeOrInf::Inf => None,
        }
    }

    /// Total order with the infinite sentinel above every finite value.
    pub fn total_cmp(&self, other: &TimeOrInf) -> Ordering {
        match (self, other) {
            (TimeOrInf::Finite(a), TimeOrInf::Finite(b)) => a.total_cmp(b),
            (TimeOrInf::Finite(_), TimeOrInf::Inf) => Ordering::Less,
            (TimeOrInf::Inf, TimeOrInf::Finite(_)) => Ordering::Greater,
            (TimeOrInf::Inf, TimeOrInf::Inf) => Ordering::Equal,
        }
    }
}

impl std::fmt::Display for TimeOrInf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeOrInf::Finite(v) => write!(f, "{v}"),
            TimeOrInf::Inf => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for TimeOrInf {
    type Err = std::num::ParseFloatError;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.trim() == "inf" {
            return Ok(TimeOrInf::Inf);
        }
        let v: f64 = s.trim().parse()?;
        if v.is_infinite() {
            Ok(TimeOrInf::Inf)
        } else {
            Ok(TimeOrInf::Finite(v))
        }
    }
}

impl Serialize for TimeOrInf {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TimeOrInf::Finite(v) => s.serialize_f64(*v),
            TimeOrInf::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for TimeOrInf {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_finite() => Ok(TimeOrInf::Finite(v)),
            Raw::Num(_) => Ok(TimeOrInf::Inf),
            Raw::Str(s) if s == "inf" => Ok(TimeOrInf::Inf),
            Raw::Str(other) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// Split a metric belongs to, by naming convention.
pub fn split_of_metric(metric: &str) -> Split {
    if metric.starts_with("validation") {
        Split::Validation
    } else {
        Split::Train
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub workload: String,
    pub metric: String,
    pub value: f64,
    pub direction: Direction,
    pub split: Split,
    /// Algorithm whose per-seed median defined the target.
    pub source_algorithm: String,
}

/// Metric value at the last sample at or before `fraction` of the budget
/// (elapsed seconds under time control, steps under step control).
pub fn metric_at_fraction(record: &TrialRecord, fraction: f64, metric: &str) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Precondition(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    let budget = &record.budget;
    budget.validate()?;
    let mut chosen: Option<&super::record::Sample> = None;
    for s in &record.samples {
        let within = match budget.condition {
            Condition::StepControl => {
                let cutoff = fraction * budget.max_steps.unwrap() as f64;
                (s.step as f64) <= cutoff + 1e-9
            }
            Condition::TimeControl => {
                let cutoff = fraction * budget.max_wall_clock_sec.unwrap();
                s.elapsed_sec <= cutoff + 1e-9
            }
        };
        if within {
            chosen = Some(s);
        } else {
            break;
        }
    }
    let sample = chosen.ok_or_else(|| {
        Error::protocol(format!(
            "{}/{} seed {}: no sample at or before {:.0}% of the budget",
            record.workload,
            record.algorithm,
            record.seed,
            fraction * 100.0
        ))
    })?;
    sample.metrics.get(metric).copied().ok_or_else(|| {
        Error::protocol(format!(
            "{}/{} seed {}: metric '{metric}' missing at step {}",
            record.workload, record.algorithm, record.seed, sample.step
        ))
    })
}

fn median_f64(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// The best across algorithms of each algorithm's median metric at
/// `fraction` of the budget. Failure-flagged trials are skipped; an
/// algorithm with no clean trial does not compete.
pub fn set_target(
    records: &[TrialRecord],
    workload: &str,
    fraction: f64,
    metric: &str,
    direction: Direction,
) -> Result<Target> {
    let mut by_algorithm: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.workload == workload) {
        if r.failed {
            continue;
        }
        let value = metric_at_fraction(r, fraction, metric)?;
        if !value.is_finite() {
            return Err(Error::protocol(format!(
                "{workload}/{}: non-finite metric '{metric}' at target fraction",
                r.algorithm
            )));
        }
        by_algorithm.entry(&r.algorithm).or_default().push(value);
    }
    if by_algorithm.is_empty() {
        return Err(Error::protocol(format!(
            "no successful trials for workload '{workload}' to set a target from"
        )));
    }
    let mut best: Option<(f64, &str)> = None;
    for (algorithm, values) in by_algorithm.iter_mut() {
        let median = median_f64(values);
        best = Some(match best {
            None => (median, algorithm),
            Some((b, a)) => {
                if direction.better(b, median) == b {
                    (b, a)
                } else {
                    (median, algorithm)
                }
            }
        });
    }
    let (value, source) = best.expect("nonempty algorithm set");
    Ok(Target {
        workload: workload.to_string(),
        metric: metric.to_string(),
        value,
        direction,
        split: split_of_metric(metric),
        source_algorithm: source.to_string(),
    })
}

/// Earliest elapsed time (time control) or step (step control) at which the
/// record first meets the target; infinite if it never does. Failed trials
/// never reach any target.
pub fn time_to_target(record: &TrialRecord, target: &Target) -> TimeOrInf {
    if record.failed {
        return TimeOrInf::Inf;
    }
    for s in &record.samples {
        if let Some(v) = s.metrics.get(&target.metric) {
            if target.direction.meets(*v, target.value) {
                return TimeOrInf::Finite(match record.budget.condition {
                    Condition::TimeControl => s.elapsed_sec,
                    Condition::StepControl => s.step as f64,
                });
            }
        }
    }
    TimeOrInf::Inf
}

/// Median with infinite sentinels sorting above all finite values. An even
/// count medians two entries: the mean if both finite, else infinite.
pub fn median_time(times: &[TimeOrInf]) -> Result<TimeOrInf> {
    if times.is_empty() {
        return Err(Error::Precondition("median of an empty set".to_string()));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        return Ok(sorted[n / 2]);
    }
    match (sorted[n / 2 - 1], sorted[n / 2]) {
        (TimeOrInf::Finite(a), TimeOrInf::Finite(b)) => Ok(TimeOrInf::Finite(0.5 * (a + b))),
        _ => Ok(TimeOrInf::Inf),
    }
}

/// Final-sample quality per algorithm: mean and sample standard deviation
/// over seeds. All records must share one budget.
pub fn training_quality(
    records: &[TrialRecord],
    budget: &Budget,
    metric: &str,
) -> Result<BTreeMap<String, (f64, f64)>> {
    let mut by_algorithm: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.budget != *budget {
            return Err(Error::protocol(format!(
                "{}/{} seed {}: mixed budgets in one quality aggregation",
                r.workload, r.algorithm, r.seed
            )));
        }
        if r.failed {
            continue;
        }
        let sample = r.final_sample().ok_or_else(|| {
            Error::protocol(format!(
                "{}/{} seed {}: record has no samples",
                r.workload, r.algorithm, r.seed
            ))
        })?;
        let v = sample.metrics.get(metric).copied().ok_or_else(|| {
            Error::protocol(format!(
                "{}/{} seed {}: metric '{metric}' missing from final sample",
                r.workload, r.algorithm, r.seed
            ))
        })?;
        by_algorithm.entry(r.algorithm.clone()).or_default().push(v);
    }
    let mut out = BTreeMap::new();
    for (alg, values) in by_algorithm {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        out.insert(alg, (mean, std));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::budget::Clock;
    use crate::protocol::record::Sample;

    fn rec(algorithm: &str, samples: Vec<(u64, f64)>, max_steps: u64) -> TrialRecord {
        let samples = samples
            .into_iter()
            .map(|(step, loss)| {
                let mut metrics = BTreeMap::new();
                metrics.insert("train_loss".to_string(), loss);
                Sample {
                    step,
                    elapsed_sec: step as f64,
                    metrics,
                }
            })
            .collect::<Vec<_>>();
        let completed = samples.last().map(|s| s.step).unwrap_or(0);
        TrialRecord {
            algorithm: algorithm.to_string(),
            workload: "w".to_string(),
            seed: 0,
            budget: Budget::step_control(max_steps, Clock::Simulated { sec_per_step: 1.0 }),
            config_hash: String::new(),
            samples,
            completed_steps: completed,
            wall_clock_total: completed as f64,
            failed: false,
        }
    }

    #[test]
    fn metric_at_fraction_basics() {
        let r = rec("a", vec![(25, 0.9), (50, 0.5), (75, 0.3), (100, 0.1)], 100);
        assert_eq!(metric_at_fraction(&r, 0.75, "train_loss").unwrap(), 0.3);
        assert_eq!(metric_at_fraction(&r, 1.0, "train_loss").unwrap(), 0.1);
        assert_eq!(metric_at_fraction(&r, 0.6, "train_loss").unwrap(), 0.5);
    }

    #[test]
    fn metric_at_fraction_no_early_sample() {
        let r = rec("a", vec![(80, 0.5), (100, 0.1)], 100);
        assert!(matches!(
            metric_at_fraction(&r, 0.75, "train_loss"),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn metric_at_fraction_bad_fraction() {
        let r = rec("a", vec![(50, 0.5)], 100);
        for f in [0.0, -0.5, 1.5] {
            assert!(matches!(
                metric_at_fraction(&r, f, "train_loss"),
                Err(Error::Precondition(_))
            ));
        }
    }

    #[test]
    fn set_target_takes_best_median() {
        // medians {0.30, 0.25}, minimize → 0.25
        let records = vec![
            rec("a", vec![(75, 0.30), (100, 0.2)], 100),
            rec("b", vec![(75, 0.25), (100, 0.2)], 100),
        ];
        let t = set_target(&records, "w", 0.75, "train_loss", Direction::Minimize).unwrap();
        assert_eq!(t.value, 0.25);
        assert_eq!(t.split, Split::Train);
    }

    #[test]
    fn set_target_median_is_middle_order_statistic() {
        let mut records = vec![];
        for (seed, v) in [(0u64, 3.0), (1, 1.0), (2, 2.0)] {
            let mut r = rec("a", vec![(75, v), (100, v)], 100);
            r.seed = seed;
            records.push(r);
        }
        let t = set_target(&records, "w", 0.75, "train_loss", Direction::Minimize).unwrap();
        assert_eq!(t.value, 2.0);
    }

    #[test]
    fn set_target_maximize_hand_case() {
        // A:{0.9,0.8,0.85} median 0.85; B:{0.7,0.95,0.75} median 0.75 → 0.85
        let mut records = vec![];
        for (seed, v) in [(0u64, 0.9), (1, 0.8), (2, 0.85)] {
            let mut r = rec("a", vec![(75, v)], 100);
            r.seed = seed;
            records.push(r);
        }
        for (seed, v) in [(0u64, 0.7), (1, 0.95), (2, 0.75)] {
            let mut r = rec("b", vec![(75, v)], 100);
            r.seed = seed;
            records.push(r);
        }
        let t = set_target(&records, "w", 0.75, "train_loss", Direction::Maximize).unwrap();
        assert_eq!(t.value, 0.85);
    }

    #[test]
    fn set_target_order_invariant() {
        let mut records = vec![
            rec("a", vec![(75, 0.30)], 100),
            rec("b", vec![(75, 0.25)], 100),
            rec("c", vec![(75, 0.40)], 100),
        ];
        let t1 = set_target(&records, "w", 0.75, "train_loss", Direction::Minimize).unwrap();
        records.reverse();
        let t2 = set_target(&records, "w", 0.75, "train_loss", Direction::Minimize).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn set_target_skips_failed_and_errors_when_empty() {
        let mut failed = rec("a", vec![(75, 0.1)], 100);
        failed.failed = true;
        assert!(matches!(
            set_target(&[failed.clone()], "w", 0.75, "train_loss", Direction::Minimize),
            Err(Error::Protocol(_))
        ));
        let ok = rec("b", vec![(75, 0.5)], 100);
        let t = set_target(&[failed, ok], "w", 0.75, "train_loss", Direction::Minimize).unwrap();
        assert_eq!(t.value, 0.5, "failed trial must not define the target");
    }

    #[test]
    fn time_to_target_first_crossing() {
        let r = rec("a", vec![(1000, 0.5), (3497, 0.1225), (5000, 0.09)], 10000);
        let target = Target {
            workload: "w".to_string(),
            metric: "train_loss".to_string(),
            value: 0.1225,
            direction: Direction::Minimize,
            split: Split::Train,
            source_algorithm: "adam".to_string(),
        };
        assert_eq!(time_to_target(&r, &target), TimeOrInf::Finite(3497.0));
    }

    #[test]
    fn time_to_target_never_reached_and_boundary() {
        let r = rec("a", vec![(10, 0.5), (20, 0.4)], 20);
        let miss = Target {
            workload: "w".to_string(),
            metric: "train_loss".to_string(),
            value: 0.1,
            direction: Direction::Minimize,
            split: Split::Train,
            source_algorithm: "adam".to_string(),
        };
        assert_eq!(time_to_target(&r, &miss), TimeOrInf::Inf);
        let boundary = Target {
            value: 0.5,
            ..miss.clone()
        };
        assert_eq!(time_to_target(&r, &boundary), TimeOrInf::Finite(10.0));
    }

    #[test]
    fn time_to_target_failed_record_is_inf() {
        let mut r = rec("a", vec![(10, 0.0)], 20);
        r.failed = true;
        let t = Target {
            workload: "w".to_string(),
            metric: "train_loss".to_string(),
            value: 1.0,
            direction: Direction::Minimize,
            split: Split::Train,
            source_algorithm: "adam".to_string(),
        };
        assert_eq!(time_to_target(&r, &t), TimeOrInf::Inf);
    }

    #[test]
    fn time_to_target_uses_elapsed_under_time_control() {
        let mut r = rec("a", vec![(10, 0.5)], 20);
        r.budget = Budget::time_control(20.0, Clock::Simulated { sec_per_step: 2.0 });
        r.samples[0].elapsed_sec = 20.0;
        r.samples[0].step = 10;
        let t = Target {
            workload: "w".to_string(),
            metric: "train_loss".to_string(),
            value: 0.5,
            direction: Direction::Minimize,
            split: Split::Train,
            source_algorithm: "adam".to_string(),
        };
        assert_eq!(time_to_target(&r, &t), TimeOrInf::Finite(20.0));
    }

    #[test]
    fn median_time_cases() {
        use TimeOrInf::*;
        assert_eq!(
            median_time(&[Finite(5.0), Finite(7.0), Finite(6.0)]).unwrap(),
            Finite(6.0)
        );
        assert_eq!(median_time(&[Finite(5.0), Inf, Inf]).unwrap(), Inf);
        assert_eq!(median_time(&[Finite(4.0), Finite(8.0)]).unwrap(), Finite(6.0));
        assert_eq!(median_time(&[Finite(4.0), Inf]).unwrap(), Inf);
        assert_eq!(median_time(&[Inf, Finite(3.0), Finite(2.0)]).unwrap(), Finite(3.0));
        assert!(median_time(&[]).is_err());
    }

    #[test]
    fn quality_mean_and_sample_std() {
        let budget = Budget::step_control(100, Clock::Simulated { sec_per_step: 1.0 });
        let mut records = vec![];
        for (seed, v) in [(0u64, 0.1229), (1, 0.1232), (2, 0.1226)] {
            let mut r = rec("velo", vec![(100, v)], 100);
            r.seed = seed;
            records.push(r);
        }
        let q = training_quality(&records, &budget, "train_loss").unwrap();
        let (mean, std) = q["velo"];
        assert!((mean - 0.1229).abs() < 1e-12);
        assert!((std - 3.0e-4).abs() < 1e-7, "sample std over three seeds, got {std}");
    }

    #[test]
    fn quality_single_trial_zero_std() {
        let budget = Budget::step_control(100, Clock::Simulated { sec_per_step: 1.0 });
        let q = training_quality(&[rec("a", vec![(100, 0.4)], 100)], &budget, "train_loss").unwrap();
        assert_eq!(q["a"], (0.4, 0.0));
    }

    #[test]
    fn quality_rejects_mixed_budgets() {
        let b1 = Budget::step_control(100, Clock::Simulated { sec_per_step: 1.0 });
        let r1 = rec("a", vec![(100, 0.4)], 100);
        let r2 = rec("a", vec![(50, 0.4)], 50);
        assert!(training_quality(&[r1, r2], &b1, "train_loss").is_err());
    }

    #[test]
    fn time_or_inf_parse_and_display() {
        use std::str::FromStr;
        assert_eq!(TimeOrInf::from_str("inf").unwrap(), TimeOrInf::Inf);
        assert_eq!(TimeOrInf::from_str("42.5").unwrap(), TimeOrInf::Finite(42.5));
        assert_eq!(TimeOrInf::Inf.to_string(), "inf");
        assert_eq!(TimeOrInf::Finite(3497.0).to_string(), "3497");
        let json = serde_json::to_string(&vec![TimeOrInf::Finite(2.0), TimeOrInf::Inf]).unwrap();
        assert_eq!(json, "[2.0,\"inf\"]");
        let back: Vec<TimeOrInf> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![TimeOrInf::Finite(2.0), TimeOrInf::Inf]);
    }
}
