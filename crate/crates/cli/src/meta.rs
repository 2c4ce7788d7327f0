//! Meta-training entry point: a TOML description of the task distribution
//! and ES settings in, a checkpoint plus meta-loss curve out.

use crate::util::atomic_write;
use optprofiler_core::error::{Error, Result};
use optprofiler_core::learned::{
    load_checkpoint, meta_train, save_checkpoint, EsConfig, FeatureConfig, LearnedOptimizerParams,
    TaskDistribution,
};
use optprofiler_core::workloads::WorkloadConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

fn default_sigma() -> f64 {
    EsConfig::default().sigma
}
fn default_n_pairs() -> usize {
    EsConfig::default().n_pairs
}
fn default_meta_lr() -> f64 {
    EsConfig::default().meta_lr
}
fn default_tasks_per_step() -> usize {
    EsConfig::default().tasks_per_step
}
fn default_eval_tasks() -> usize {
    EsConfig::default().eval_tasks
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConfig {
    pub task: WorkloadConfig,
    pub inner_steps: u64,
    pub meta_steps: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_n_pairs")]
    pub n_pairs: usize,
    #[serde(default = "default_meta_lr")]
    pub meta_lr: f64,
    #[serde(default = "default_tasks_per_step")]
    pub tasks_per_step: usize,
    #[serde(default = "default_eval_tasks")]
    pub eval_tasks: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub distribution_seed: u64,
    #[serde(default)]
    pub init_seed: u64,
    pub layer_sizes: Option<Vec<usize>>,
    /// Checkpoint to continue from; the curve file then appends.
    pub resume: Option<PathBuf>,
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.meta_steps == 0 {
            return Err(Error::config("meta_steps must be >= 1"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.meta_lr > 0.0 && self.meta_lr.is_finite()) {
            return Err(Error::config(format!(
                "meta_lr must be > 0, got {}",
                self.meta_lr
            )));
        }
        if self.n_pairs == 0 || self.tasks_per_step == 0 || self.eval_tasks == 0 {
            return Err(Error::config(
                "n_pairs, tasks_per_step and eval_tasks must be >= 1",
            ));
        }
        Ok(())
    }

    fn es(&self) -> EsConfig {
        EsConfig {
            sigma: self.sigma,
            n_pairs: self.n_pairs,
            meta_lr: self.meta_lr,
            tasks_per_step: self.tasks_per_step,
            eval_tasks: self.eval_tasks,
            seed: self.seed,
        }
    }
}

pub fn load_meta_config(path: &Path) -> Result<MetaConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: MetaConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

#[derive(Debug)]
pub struct MetaTrainSummary {
    pub checkpoint: PathBuf,
    pub curve: PathBuf,
    pub initial_meta_loss: f64,
    pub final_meta_loss: f64,
    pub divergence: Option<String>,
}

fn init_params(config: &MetaConfig) -> Result<LearnedOptimizerParams> {
    match &config.resume {
        Some(path) => load_checkpoint(path),
        None => {
            let features = FeatureConfig::default();
            let sizes = config
                .layer_sizes
                .clone()
                .unwrap_or_else(|| vec![features.feature_dim(), 16, 16, 2]);
            LearnedOptimizerParams::zero_init(sizes, features, config.init_seed)
        }
    }
}

/// Curve rows already on disk, so a resumed run keeps a single monotone
/// step numbering per output directory.
fn existing_curve(path: &Path) -> Result<Vec<(u64, f64)>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let mut parts = line.split(',');
        let step = parts.next().and_then(|s| s.parse::<u64>().ok());
        let loss = parts.next().and_then(|s| s.parse::<f64>().ok());
        match (step, loss) {
            (Some(s), Some(l)) => rows.push((s, l)),
            _ => {
                return Err(Error::Parse {
                    row: i + 1,
                    col: 0,
                    message: format!("bad curve line '{line}' in {}", path.display()),
                })
            }
        }
    }
    Ok(rows)
}

pub fn cmd_meta_train(config: &MetaConfig, out: &Path) -> Result<MetaTrainSummary> {
    config.validate()?;
    let init = init_params(config)?;
    let distribution = TaskDistribution {
        workload_template: config.task.clone(),
        inner_steps: config.inner_steps,
        seed: config.distribution_seed,
    };
    let outcome = meta_train(init, &distribution, &config.es(), config.meta_steps)?;

    let checkpoint = out.join("checkpoint.json");
    save_checkpoint(&checkpoint, &outcome.params)?;

    let curve = out.join("meta_curve.csv");
    let mut rows = if config.resume.is_some() {
        existing_curve(&curve)?
    } else {
        Vec::new()
    };
    let offset = rows.last().map(|(s, _)| s + 1).unwrap_or(0);
    for (i, loss) in outcome.meta_loss_curve.iter().enumerate() {
        rows.push((offset + i as u64, *loss));
    }
    let mut text = String::from("meta_step,meta_loss\n");
    for (step, loss) in &rows {
        text.push_str(&format!("{step},{loss}\n"));
    }
    atomic_write(&curve, text.as_bytes())?;

    Ok(MetaTrainSummary {
        checkpoint,
        curve,
        initial_meta_loss: *outcome.meta_loss_curve.first().unwrap_or(&f64::NAN),
        final_meta_loss: *outcome.meta_loss_curve.last().unwrap_or(&f64::NAN),
        divergence: outcome.divergence,
    })
}
