//! Cell execution: every (workload, algorithm, seed) triple becomes one
//! trial record on disk. Completed cells whose stored config hash matches
//! the current config are skipped, so interrupted sweeps resume cheaply.

use crate::config::{AlgorithmConfig, PromptPolicy, RunConfig};
use optprofiler_core::error::{Error, Result};
use optprofiler_core::learned::{
    estimate_step_prompt, load_checkpoint, FeatureConfig, LearnedOptimizerParams, PilotRun,
};
use optprofiler_core::optim::{Algorithm, BaselineHyperparams};
use optprofiler_core::protocol::{
    read_trial_record, record_path, run_trial, write_trial_record, AlgorithmSpec, Budget, Clock,
    Condition,
};
use optprofiler_core::workloads::{make_workload, Workload};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

/// Workload data (matrices, datasets) is derived from this fixed seed; trial
/// seeds only vary initialization and batch order.
pub const WORKLOAD_DATA_SEED: u64 = 0;

pub struct RunOutcome {
    pub executed: usize,
    pub skipped: usize,
    pub paths: Vec<PathBuf>,
}

struct Cell {
    workload_id: String,
    budget: Budget,
    spec_index: usize,
    seed: u64,
}

/// Baseline hyperparameters for one workload, defaults plus any override.
pub(crate) fn baseline_hp(
    name: &str,
    base_lr: Option<f64>,
    step_hint: u64,
) -> Result<BaselineHyperparams> {
    let algorithm = Algorithm::from_str(name)?;
    let mut hp = BaselineHyperparams::defaults(algorithm, step_hint);
    if let Some(lr) = base_lr {
        hp.base_lr = lr;
    }
    Ok(hp)
}

fn load_learned_params(
    checkpoint: Option<&Path>,
    layer_sizes: Option<&[usize]>,
    init_seed: u64,
) -> Result<LearnedOptimizerParams> {
    match checkpoint {
        Some(path) => load_checkpoint(path),
        None => {
            let sizes = layer_sizes
                .map(<[usize]>::to_vec)
                .unwrap_or_else(|| vec![FeatureConfig::default().feature_dim(), 16, 16, 2]);
            LearnedOptimizerParams::zero_init(sizes, FeatureConfig::default(), init_seed)
        }
    }
}

/// Total-steps prompt for a learned cell. Step control reads the budget
/// directly; time control estimates step capacity from a short pilot run.
fn resolve_prompt(
    params: &LearnedOptimizerParams,
    workload: &dyn Workload,
    budget: &Budget,
    policy: PromptPolicy,
    pilot_seed: u64,
) -> Result<u64> {
    let full_steps = match budget.condition {
        Condition::StepControl => budget.max_steps.expect("validated step budget"),
        Condition::TimeControl => {
            let max_t = budget.max_wall_clock_sec.expect("validated time budget");
            let hint = workload.step_hint();
            let pilot_steps = ((hint as f64 * 0.05) as u64).max(10);
            let observed = match budget.clock {
                Clock::Simulated { sec_per_step } => pilot_steps as f64 * sec_per_step,
                Clock::Real => {
                    let pilot_budget = Budget::step_control(pilot_steps, Clock::Real);
                    let spec = AlgorithmSpec::Learned {
                        name: "pilot".to_string(),
                        params: params.clone(),
                        total_steps_prompt: pilot_steps,
                    };
                    let start = Instant::now();
                    run_trial(&spec, workload, &pilot_budget, pilot_seed, pilot_steps, "pilot")?;
                    start.elapsed().as_secs_f64()
                }
            };
            estimate_step_prompt(
                PilotRun {
                    steps_run: pilot_steps,
                    observed_runtime_sec: observed,
                },
                max_t,
            )?
        }
    };
    Ok(((full_steps as f64 * policy.fraction()).floor() as u64).max(1))
}

/// Resolve every (workload, algorithm) pair to a runnable spec before any
/// cell executes, so config mistakes fail the whole run upfront.
fn resolve_specs(
    config: &RunConfig,
    condition: Condition,
    clock_override: Option<f64>,
) -> Result<(Vec<AlgorithmSpec>, Vec<Cell>)> {
    let mut specs = Vec::new();
    let mut cells = Vec::new();
    for entry in &config.workloads {
        let budget = entry.budget.build(condition, clock_override)?;
        let workload = make_workload(&entry.workload, WORKLOAD_DATA_SEED)?;
        for algorithm in &config.algorithms {
            let spec = match algorithm {
                AlgorithmConfig::Baseline { name, base_lr } => AlgorithmSpec::Baseline {
                    name: name.clone(),
                    hp: baseline_hp(name, *base_lr, workload.step_hint())?,
                },
                AlgorithmConfig::Learned {
                    name,
                    checkpoint,
                    prompt,
                    layer_sizes,
                    init_seed,
                } => {
                    let params = load_learned_params(
                        checkpoint.as_deref(),
                        layer_sizes.as_deref(),
                        *init_seed,
                    )?;
                    let total_steps_prompt = resolve_prompt(
                        &params,
                        workload.as_ref(),
                        &budget,
                        *prompt,
                        config.seeds[0],
                    )?;
                    AlgorithmSpec::Learned {
                        name: name.clone(),
                        params,
                        total_steps_prompt,
                    }
                }
            };
            let spec_index = specs.len();
            specs.push(spec);
            for &seed in &config.seeds {
                cells.push(Cell {
                    workload_id: entry.workload.id().to_string(),
                    budget: budget.clone(),
                    spec_index,
                    seed,
                });
            }
        }
    }
    Ok((specs, cells))
}

pub fn cmd_run(config: &RunConfig, out_dir: &Path, jobs: Option<usize>) -> Result<RunOutcome> {
    config.validate()?;
    let condition = config.condition;
    let (specs, cells) = resolve_specs(config, condition, None)?;
    run_cells(config, &specs, cells, out_dir, jobs)
}

/// Like `cmd_run` but with the flag overrides already parsed.
pub fn cmd_run_with_overrides(
    config: &RunConfig,
    out_dir: &Path,
    jobs: Option<usize>,
    condition: Option<Condition>,
    clock_override: Option<f64>,
) -> Result<RunOutcome> {
    config.validate()?;
    let condition = condition.unwrap_or(config.condition);
    let (specs, cells) = resolve_specs(config, condition, clock_override)?;
    run_cells(config, &specs, cells, out_dir, jobs)
}

fn run_cells(
    config: &RunConfig,
    specs: &[AlgorithmSpec],
    cells: Vec<Cell>,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<RunOutcome> {
    let hash = config.hash();
    let mut pending = Vec::new();
    let mut skipped = 0usize;
    let mut paths = Vec::new();
    for cell in cells {
        let spec = &specs[cell.spec_index];
        let path = out_dir.join(record_path(&cell.workload_id, spec.name(), cell.seed));
        if let Ok(existing) = read_trial_record(&path) {
            if existing.config_hash == hash {
                skipped += 1;
                paths.push(path);
                continue;
            }
        }
        paths.push(path);
        pending.push(cell);
    }

    let executed = pending.len();
    let work = |cell: &Cell| -> Result<()> {
        let entry = config
            .workload(&cell.workload_id)
            .expect("cell built from config");
        let workload = make_workload(&entry.workload, WORKLOAD_DATA_SEED)?;
        let record = run_trial(
            &specs[cell.spec_index],
            workload.as_ref(),
            &cell.budget,
            cell.seed,
            config.eval_every,
            &hash,
        )?;
        write_trial_record(out_dir, &record)?;
        Ok(())
    };

    let results: Vec<Result<()>> = match jobs {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(|| pending.par_iter().map(work).collect()),
        _ => pending.par_iter().map(work).collect(),
    };
    for r in results {
        r?;
    }
    Ok(RunOutcome {
        executed,
        skipped,
        paths,
    })
}
