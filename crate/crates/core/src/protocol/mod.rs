//! Benchmark protocol: budgets, trial execution, record persistence, target
//! setting, and time-to-target extraction.

mod analyze;
mod budget;
mod hardware;
mod record;
mod run;

pub use analyze::{
    median_time, metric_at_fraction, set_target, split_of_metric, time_to_target,
    training_quality, Split, Target, TimeOrInf,
};
pub use budget::{Budget, Clock, Condition};
pub use hardware::{transfer_budget, HardwareCalibration};
pub use record::{
    read_all_records, read_trial_record, record_path, write_trial_record, Sample, TrialRecord,
};
pub use run::{run_trial, AlgorithmSpec};

#[cfg(test)]
mod integration_tests {
    use super::*;
    use crate::optim::{Algorithm, BaselineHyperparams};
    use crate::workloads::{make_workload, Direction, Spectrum, Workload, WorkloadConfig};

    fn quad(step_hint: u64) -> Box<dyn Workload> {
        make_workload(
            &WorkloadConfig::Quadratic {
                id: None,
                dim: 2,
                spectrum: Spectrum::Eigenvalues(vec![0.8, 1.6]),
                rotate: false,
                step_hint,
            },
            3,
        )
        .unwrap()
    }

    fn spec(alg: Algorithm, step_hint: u64) -> AlgorithmSpec {
        AlgorithmSpec::Baseline {
            name: alg.name().to_string(),
            hp: BaselineHyperparams::defaults(alg, step_hint),
        }
    }

    #[test]
    fn growing_budget_never_hurts_time_to_target() {
        let w = quad(200);
        let small = Budget::step_control(100, Clock::Simulated { sec_per_step: 1.0 });
        let large = Budget::step_control(200, Clock::Simulated { sec_per_step: 1.0 });
        let target = Target {
            workload: w.id().to_string(),
            metric: "train_loss".to_string(),
            value: 0.05,
            direction: Direction::Minimize,
            split: Split::Train,
            source_algorithm: "adam".to_string(),
        };
        for seed in 0..3 {
            let r_small =
                run_trial(&spec(Algorithm::Adam, 200), w.as_ref(), &small, seed, 5, "h").unwrap();
            let r_large =
                run_trial(&spec(Algorithm::Adam, 200), w.as_ref(), &large, seed, 5, "h").unwrap();
            let t_small = time_to_target(&r_small, &target);
            let t_large = time_to_target(&r_large, &target);
            match (t_small, t_large) {
                (TimeOrInf::Finite(a), TimeOrInf::Finite(b)) => {
                    assert!(b <= a, "larger budget should not be slower: {a} vs {b}")
                }
                (TimeOrInf::Finite(_), TimeOrInf::Inf) => {
                    panic!("larger budget turned a finite result infinite")
                }
                _ => {}
            }
        }
    }

    #[test]
    fn target_definer_reaches_own_target() {
        let w = quad(150);
        let budget = Budget::step_control(150, Clock::Simulated { sec_per_step: 1.0 });
        let mut records = Vec::new();
        for alg in [Algorithm::Adam, Algorithm::HeavyBall, Algorithm::Nesterov] {
            for seed in 0..3 {
                records
                    .push(run_trial(&spec(alg, 150), w.as_ref(), &budget, seed, 5, "h").unwrap());
            }
        }
        let target =
            set_target(&records, w.id(), 0.75, "train_loss", Direction::Minimize).unwrap();
        assert!(target.value.is_finite());

        // some algorithm's median time to this target must be finite
        let mut any_finite_median = false;
        for alg in ["adam", "heavy_ball", "nesterov"] {
            let times: Vec<TimeOrInf> = records
                .iter()
                .filter(|r| r.algorithm == alg)
                .map(|r| time_to_target(r, &target))
                .collect();
            if median_time(&times).unwrap().is_finite() {
                any_finite_median = true;
            }
        }
        assert!(
            any_finite_median,
            "the algorithm that defined the target must reach it on its median trial"
        );
    }
}
