//! Single-trial execution under a budget.

use super::budget::{Budget, Clock};
use super::record::{Sample, TrialRecord};
use crate::error::{Error, Result};
use crate::learned::{learned_step, LearnedOptimizerParams, LearnedOptimizerState};
use crate::optim::{baseline_step, BaselineHyperparams, OptimizerState};
use crate::params::ParamVector;
use crate::workloads::Workload;
use std::time::Instant;

/// A fully resolved optimizer ready to run: baselines carry hyperparameters,
/// the learned rule carries its weights and an already-decided step prompt.
pub enum AlgorithmSpec {
    Baseline {
        name: String,
        hp: BaselineHyperparams,
    },
    Learned {
        name: String,
        params: LearnedOptimizerParams,
        total_steps_prompt: u64,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &str {
        match self {
            AlgorithmSpec::Baseline { name, .. } => name,
            AlgorithmSpec::Learned { name, .. } => name,
        }
    }
}

enum Runner {
    Baseline(BaselineHyperparams, OptimizerState),
    Learned(LearnedOptimizerParams, LearnedOptimizerState),
}

impl Runner {
    fn step(&mut self, params: &ParamVector, grad: &ParamVector, loss: f64) -> Result<ParamVector> {
        match self {
            Runner::Baseline(hp, state) => {
                let (next, next_state) = baseline_step(hp, state, params, grad)?;
                *state = next_state;
                Ok(next)
            }
            Runner::Learned(opt, state) => {
                let (next, next_state) = learned_step(opt, state, params, grad, loss)?;
                *state = next_state;
                Ok(next)
            }
        }
    }
}

/// Train until the budget is exhausted, sampling metrics every `eval_every`
/// steps and at the final step. Numeric failures truncate the record and set
/// the failure flag instead of erroring, so one diverging trial cannot sink a
/// whole benchmark run.
pub fn run_trial(
    spec: &AlgorithmSpec,
    workload: &dyn Workload,
    budget: &Budget,
    seed: u64,
    eval_every: u64,
    config_hash: &str,
) -> Result<TrialRecord> {
    budget.validate()?;
    if eval_every == 0 {
        return Err(Error::Precondition("eval_every must be >= 1".to_string()));
    }

    let mut params = workload.init(seed);
    let mut runner = match spec {
        AlgorithmSpec::Baseline { hp, .. } => {
            Runner::Baseline(hp.clone(), OptimizerState::new(&params))
        }
        AlgorithmSpec::Learned {
            params: opt,
            total_steps_prompt,
            ..
        } => {
            opt.validate()?;
            let state = LearnedOptimizerState::new(&params, *total_steps_prompt, &opt.feature_config)?;
            Runner::Learned(opt.clone(), state)
        }
    };

    let known_limit = budget.known_step_limit();
    let start = Instant::now();
    let elapsed_now = |steps: u64| -> f64 {
        match budget.clock {
            Clock::Simulated { sec_per_step } => steps as f64 * sec_per_step,
            Clock::Real => start.elapsed().as_secs_f64(),
        }
    };

    let mut steps_done: u64 = 0;
    let mut failed = false;
    let mut samples: Vec<Sample> = Vec::new();

    loop {
        match known_limit {
            Some(limit) => {
                if steps_done >= limit {
                    break;
                }
            }
            None => {
                // real-clock time control: stop before the step that would
                // likely exceed the budget, predicting by the mean step cost
                let max_t = budget.max_wall_clock_sec.expect("validated time budget");
                let elapsed = start.elapsed().as_secs_f64();
                let projected = if steps_done == 0 {
                    elapsed
                } else {
                    elapsed + elapsed / steps_done as f64
                };
                if projected >= max_t {
                    break;
                }
            }
        }

        let batch = workload.train_batch(seed, steps_done);
        let outcome = workload
            .loss_and_grad(&params, &batch)
            .and_then(|(loss, grad)| runner.step(&params, &grad, loss));
        match outcome {
            Ok(next) => params = next,
            Err(Error::Numeric { .. }) => {
                failed = true;
                break;
            }
            Err(e) => return Err(e),
        }
        steps_done += 1;

        if steps_done % eval_every == 0 {
            samples.push(Sample {
                step: steps_done,
                elapsed_sec: elapsed_now(steps_done),
                metrics: workload.eval_metrics(&params),
            });
        }
    }

    if !failed && steps_done > 0 && samples.last().map(|s| s.step) != Some(steps_done) {
        samples.push(Sample {
            step: steps_done,
            elapsed_sec: elapsed_now(steps_done),
            metrics: workload.eval_metrics(&params),
        });
    }

    let record = TrialRecord {
        algorithm: spec.name().to_string(),
        workload: workload.id().to_string(),
        seed,
        budget: budget.clone(),
        config_hash: config_hash.to_string(),
        samples,
        completed_steps: steps_done,
        wall_clock_total: elapsed_now(steps_done),
        failed,
    };
    record.validate()?;
    Ok(record)
}
