//! Desk-scale training workloads with analytic gradients.
//!
//! Each workload generates its own synthetic data from a seeded stream (no
//! downloads), exposes a deterministic `loss_and_grad`, and reports train and
//! validation metrics with explicit optimization directions. Data splits are
//! fixed at 80% train / 20% validation.

mod logreg;
mod mlp;
mod quadratic;

pub use logreg::LogisticRegressionWorkload;
pub use mlp::MlpRegressionWorkload;
pub use quadratic::QuadraticWorkload;

use crate::error::{Error, Result};
use crate::params::{Batch, ParamVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Whether a metric improves by going down or up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// True if `candidate` is at least as good as `reference`.
    pub fn meets(&self, candidate: f64, reference: f64) -> bool {
        match self {
            Direction::Minimize => candidate <= reference,
            Direction::Maximize => candidate >= reference,
        }
    }

    /// The better of two values.
    pub fn better(&self, a: f64, b: f64) -> f64 {
        match self {
            Direction::Minimize => a.min(b),
            Direction::Maximize => a.max(b),
        }
    }
}

/// A loss/gradient evaluator over seeded synthetic data.
///
/// `loss_and_grad` must be deterministic given `(params, batch)` and return a
/// gradient with the same segment structure as the parameters.
pub trait Workload: Send + Sync {
    fn id(&self) -> &str;

    /// Initial parameters for a trial seed.
    fn init(&self, seed: u64) -> ParamVector;

    /// Minibatch for a given trial seed and step index.
    fn train_batch(&self, seed: u64, step: u64) -> Batch;

    fn loss_and_grad(&self, params: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)>;

    /// Metrics over the full train/validation splits.
    fn eval_metrics(&self, params: &ParamVector) -> BTreeMap<String, f64>;

    fn metric_directions(&self) -> BTreeMap<String, Direction>;

    /// Nominal step count used to size learning-rate schedules.
    fn step_hint(&self) -> u64;

    /// Loss only; used by the finite-difference oracle.
    fn loss(&self, params: &ParamVector, batch: &Batch) -> Result<f64> {
        Ok(self.loss_and_grad(params, batch)?.0)
    }
}

/// Eigenvalue spectrum of the quadratic workload.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spectrum {
    /// Explicit eigenvalues, one per dimension.
    Eigenvalues(Vec<f64>),
    /// Eigenvalues drawn uniformly from `[min, max]`.
    Range { min: f64, max: f64 },
}

/// Serializable workload description, as written in run-config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadConfig {
    Quadratic {
        #[serde(default)]
        id: Option<String>,
        dim: usize,
        spectrum: Spectrum,
        #[serde(default)]
        rotate: bool,
        step_hint: u64,
    },
    Logreg {
        #[serde(default)]
        id: Option<String>,
        dim: usize,
        #[serde(default = "default_n_samples")]
        n_samples: usize,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        step_hint: u64,
    },
    MlpRegression {
        #[serde(default)]
        id: Option<String>,
        input_dim: usize,
        hidden_dim: usize,
        #[serde(default = "default_n_samples")]
        n_samples: usize,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        step_hint: u64,
    },
}

fn default_n_samples() -> usize {
    400
}

fn default_batch_size() -> usize {
    32
}

fn default_separation() -> f64 {
    2.0
}

impl WorkloadConfig {
    pub fn id(&self) -> String {
        match self {
            WorkloadConfig::Quadratic { id, .. } => {
                id.clone().unwrap_or_else(|| "quadratic".to_string())
            }
            WorkloadConfig::Logreg { id, .. } => id.clone().unwrap_or_else(|| "logreg".to_string()),
            WorkloadConfig::MlpRegression { id, .. } => {
                id.clone().unwrap_or_else(|| "mlp_regression".to_string())
            }
        }
    }
}

/// Instantiate a workload from its config and a data-generation seed.
pub fn make_workload(config: &WorkloadConfig, seed: u64) -> Result<Box<dyn Workload>> {
    match config {
        WorkloadConfig::Quadratic {
            dim,
            spectrum,
            rotate,
            step_hint,
            ..
        } => Ok(Box::new(QuadraticWorkload::new(
            config.id(),
            *dim,
            spectrum,
            *rotate,
            *step_hint,
            seed,
        )?)),
        WorkloadConfig::Logreg {
            dim,
            n_samples,
            batch_size,
            separation,
            step_hint,
            ..
        } => Ok(Box::new(LogisticRegressionWorkload::new(
            config.id(),
            *dim,
            *n_samples,
            *batch_size,
            *separation,
            *step_hint,
            seed,
        )?)),
        WorkloadConfig::MlpRegression {
            input_dim,
            hidden_dim,
            n_samples,
            batch_size,
            step_hint,
            ..
        } => Ok(Box::new(MlpRegressionWorkload::new(
            config.id(),
            *input_dim,
            *hidden_dim,
            *n_samples,
            *batch_size,
            *step_hint,
            seed,
        )?)),
    }
}

/// Central finite differences `(L(θ+h·eᵢ) − L(θ−h·eᵢ)) / 2h` per coordinate.
///
/// Uses only loss evaluations, so it stays independent of each workload's
/// analytic gradient path.
pub fn finite_diff_grad(
    workload: &dyn Workload,
    params: &ParamVector,
    batch: &Batch,
    h: f64,
) -> Result<ParamVector> {
    if !(h > 0.0) {
        return Err(Error::Precondition(format!(
            "finite_diff_grad requires h > 0, got {h}"
        )));
    }
    let mut probe = params.clone();
    let mut grad = params.zeros_like();
    let n_segments = params.segments().len();
    for si in 0..n_segments {
        let seg_len = params.segments()[si].values.len();
        for vi in 0..seg_len {
            let original = params.segments()[si].values[vi];
            set_value(&mut probe, si, vi, original + h);
            let plus = workload.loss(&probe, batch)?;
            set_value(&mut probe, si, vi, original - h);
            let minus = workload.loss(&probe, batch)?;
            set_value(&mut probe, si, vi, original);
            let d = (plus - minus) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::numeric(
                    "finite_diff_grad",
                    params.segments()[si].name.clone(),
                ));
            }
            set_value(&mut grad, si, vi, d);
        }
    }
    Ok(grad)
}

fn set_value(p: &mut ParamVector, segment: usize, index: usize, value: f64) {
    // Walk to the target coordinate; segments are small at desk scale.
    let offset: usize = p
        .segments()
        .iter()
        .take(segment)
        .map(|s| s.values.len())
        .sum::<usize>()
        + index;
    if let Some(v) = p.values_mut().nth(offset) {
        *v = value;
    }
}

/// Scale-aware gradient comparison: `|a−b| / max(1, |a|, |b|)`.
pub fn gradient_relative_error(analytic: &ParamVector, numeric: &ParamVector) -> f64 {
    analytic
        .values()
        .zip(numeric.values())
        .map(|(a, b)| (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs()))
        .fold(0.0, f64::max)
}
