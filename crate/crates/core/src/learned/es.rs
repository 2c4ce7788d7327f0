//! Antithetic evolution-strategies meta-gradient and the outer training loop.
//!
//! The estimator evaluates mirrored perturbation pairs F(λ±σε) and averages
//! (F₊−F₋)ε/(2σ). Pair evaluations run in parallel but the reduction is a
//! fixed-order sequential sum, so results do not depend on worker count.

use super::{learned_step, LearnedOptimizerParams, LearnedOptimizerState};
use crate::error::{Error, Result};
use crate::optim::{baseline_step, Algorithm, BaselineHyperparams, OptimizerState};
use crate::params::ParamVector;
use crate::rng::RngStream;
use crate::workloads::{make_workload, Workload, WorkloadConfig};
use rand::Rng;
use rayon::prelude::*;

/// One inner-training problem: a workload plus how long to train on it.
pub struct MetaTask {
    pub workload: Box<dyn Workload>,
    pub inner_steps: u64,
    pub seed: u64,
}

impl MetaTask {
    pub fn new(workload: Box<dyn Workload>, inner_steps: u64, seed: u64) -> Result<Self> {
        if inner_steps == 0 {
            return Err(Error::Precondition("inner_steps must be >= 1".to_string()));
        }
        Ok(Self {
            workload,
            inner_steps,
            seed,
        })
    }
}

/// Mean over tasks of log(1 + final training loss) after running the learned
/// optimizer for each task's inner-step budget. Any numeric failure inside an
/// inner run yields NaN so the caller can discard the sample.
pub fn meta_loss(opt: &LearnedOptimizerParams, tasks: &[MetaTask]) -> f64 {
    if tasks.is_empty() {
        return f64::NAN;
    }
    let mut total = 0.0;
    for task in tasks {
        let w = task.workload.as_ref();
        let mut params = w.init(task.seed);
        let mut state =
            match LearnedOptimizerState::new(&params, task.inner_steps, &opt.feature_config) {
                Ok(s) => s,
                Err(_) => return f64::NAN,
            };
        for step in 0..task.inner_steps {
            let batch = w.train_batch(task.seed, step);
            let (loss, grad) = match w.loss_and_grad(&params, &batch) {
                Ok(v) => v,
                Err(_) => return f64::NAN,
            };
            match learned_step(opt, &state, &params, &grad, loss) {
                Ok((p, s)) => {
                    params = p;
                    state = s;
                }
                Err(_) => return f64::NAN,
            }
        }
        let final_loss = *w
            .eval_metrics(&params)
            .get("train_loss")
            .unwrap_or(&f64::NAN);
        if !final_loss.is_finite() || final_loss < 0.0 {
            return f64::NAN;
        }
        total += final_loss.ln_1p();
    }
    total / tasks.len() as f64
}

#[derive(Debug, Clone)]
pub struct EsEstimate {
    pub gradient: Vec<f64>,
    pub kept_pairs: usize,
    pub discarded_pairs: usize,
    /// Mean of the evaluated F values, a cheap progress signal.
    pub mean_value: f64,
}

/// Estimator core with the perturbations supplied explicitly (test seam).
pub fn es_gradient_estimate_with_eps<F>(
    lambda: &[f64],
    f: F,
    sigma: f64,
    epsilons: &[Vec<f64>],
) -> Result<EsEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(sigma > 0.0) {
        return Err(Error::Precondition(format!("sigma must be > 0, got {sigma}")));
    }
    if epsilons.is_empty() {
        return Err(Error::Precondition("need at least one perturbation pair".to_string()));
    }
    let dim = lambda.len();
    for eps in epsilons {
        if eps.len() != dim {
            return Err(Error::Structure {
                expected: format!("perturbations of dim {dim}"),
                actual: format!("dim {}", eps.len()),
            });
        }
    }

    // Parallel evaluation; order preserved by indexed collect.
    let pairs: Vec<(f64, f64)> = epsilons
        .par_iter()
        .map(|eps| {
            let plus: Vec<f64> = lambda
                .iter()
                .zip(eps.iter())
                .map(|(l, e)| l + sigma * e)
                .collect();
            let minus: Vec<f64> = lambda
                .iter()
                .zip(eps.iter())
                .map(|(l, e)| l - sigma * e)
                .collect();
            (f(&plus), f(&minus))
        })
        .collect();

    let mut gradient = vec![0.0; dim];
    let mut kept = 0usize;
    let mut discarded = 0usize;
    let mut value_sum = 0.0;
    for (eps, (fp, fm)) in epsilons.iter().zip(pairs.iter()) {
        if !fp.is_finite() || !fm.is_finite() {
            discarded += 1;
            continue;
        }
        let diff = fp - fm;
        for (g, e) in gradient.iter_mut().zip(eps.iter()) {
            *g += diff * e;
        }
        value_sum += 0.5 * (fp + fm);
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::Estimation(format!(
            "all {discarded} perturbation pairs produced non-finite meta-loss"
        )));
    }
    let scale = 1.0 / (2.0 * sigma * kept as f64);
    for g in &mut gradient {
        *g *= scale;
    }
    Ok(EsEstimate {
        gradient,
        kept_pairs: kept,
        discarded_pairs: discarded,
        mean_value: value_sum / kept as f64,
    })
}

/// Seeded wrapper: draws `n_pairs` Gaussian perturbations, then delegates.
pub fn es_gradient_estimate<F>(
    lambda: &[f64],
    f: F,
    sigma: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<EsEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_pairs == 0 {
        return Err(Error::Precondition("n_pairs must be >= 1".to_string()));
    }
    let dim = lambda.len();
    let flat = RngStream::new(seed, "es.eps").normals(n_pairs * dim);
    let epsilons: Vec<Vec<f64>> = flat.chunks(dim).map(|c| c.to_vec()).collect();
    es_gradient_estimate_with_eps(lambda, f, sigma, &epsilons)
}

/// ES gradient of the meta-loss over the given tasks.
pub fn es_meta_gradient(
    opt: &LearnedOptimizerParams,
    tasks: &[MetaTask],
    sigma: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<EsEstimate> {
    opt.validate()?;
    es_gradient_estimate(
        &opt.mlp_weights,
        |lambda| match opt.with_weights(lambda.to_vec()) {
            Ok(candidate) => meta_loss(&candidate, tasks),
            Err(_) => f64::NAN,
        },
        sigma,
        n_pairs,
        seed,
    )
}

/// Task sampler: instantiates the workload template with fresh seeds so each
/// draw is a new problem from the same family.
#[derive(Debug, Clone)]
pub struct TaskDistribution {
    pub workload_template: WorkloadConfig,
    pub inner_steps: u64,
    pub seed: u64,
}

impl TaskDistribution {
    pub fn sample(&self, label: &str, count: usize) -> Result<Vec<MetaTask>> {
        let mut rng = RngStream::new(self.seed, format!("tasks.{label}")).rng();
        (0..count)
            .map(|_| {
                let task_seed: u64 = rng.random();
                let workload = make_workload(&self.workload_template, task_seed)?;
                MetaTask::new(workload, self.inner_steps, task_seed)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct EsConfig {
    pub sigma: f64,
    pub n_pairs: usize,
    pub meta_lr: f64,
    pub tasks_per_step: usize,
    pub eval_tasks: usize,
    pub seed: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            n_pairs: 16,
            meta_lr: 0.03,
            tasks_per_step: 8,
            eval_tasks: 16,
            seed: 0,
        }
    }
}

pub struct MetaTrainOutcome {
    pub params: LearnedOptimizerParams,
    /// Meta-loss on a fixed evaluation task set, one entry per meta-step plus
    /// the final value (so `curve[0]` is the initialization loss).
    pub meta_loss_curve: Vec<f64>,
    /// Set when training aborted; `params` then holds the last finite λ.
    pub divergence: Option<String>,
}

/// Outer loop: Adam over λ driven by ES estimates. Deterministic given the
/// config seeds. On divergence the last finite λ is returned with a
/// diagnostic rather than an error, so partial progress is never lost.
pub fn meta_train(
    init: LearnedOptimizerParams,
    distribution: &TaskDistribution,
    es: &EsConfig,
    meta_steps: u64,
) -> Result<MetaTrainOutcome> {
    init.validate()?;
    if es.tasks_per_step == 0 || es.eval_tasks == 0 {
        return Err(Error::config("tasks_per_step and eval_tasks must be >= 1"));
    }
    let eval_tasks = distribution.sample("eval", es.eval_tasks)?;
    let meta_hp = BaselineHyperparams {
        algorithm: Algorithm::Adam,
        base_lr: es.meta_lr,
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
        decoupled_weight_decay: 0.0,
        schedule: None,
    };

    let mut current = init;
    let mut lambda = ParamVector::from_flat("lambda", current.mlp_weights.clone())?;
    let mut meta_state = OptimizerState::new(&lambda);
    let mut curve = Vec::with_capacity(meta_steps as usize + 1);
    let mut seed_rng = RngStream::new(es.seed, "es.step_seeds").rng();

    for k in 0..meta_steps {
        let eval_loss = meta_loss(&current, &eval_tasks);
        if !eval_loss.is_finite() {
            return Ok(MetaTrainOutcome {
                params: current,
                meta_loss_curve: curve,
                divergence: Some(format!("meta-loss became non-finite at meta-step {k}")),
            });
        }
        curve.push(eval_loss);

        let train_tasks = distribution.sample(&format!("step{k}"), es.tasks_per_step)?;
        let step_seed: u64 = seed_rng.random();
        let estimate = match es_meta_gradient(&current, &train_tasks, es.sigma, es.n_pairs, step_seed)
        {
            Ok(e) => e,
            Err(Error::Estimation(msg)) => {
                return Ok(MetaTrainOutcome {
                    params: current,
                    meta_loss_curve: curve,
                    divergence: Some(format!("meta-step {k}: {msg}")),
                });
            }
            Err(e) => return Err(e),
        };
        let grad = ParamVector::from_flat("lambda", estimate.gradient)?;
        match baseline_step(&meta_hp, &meta_state, &lambda, &grad) {
            Ok((next_lambda, next_state)) => {
                lambda = next_lambda;
                meta_state = next_state;
                current = current.with_weights(lambda.to_flat())?;
            }
            Err(Error::Numeric { .. }) => {
                return Ok(MetaTrainOutcome {
                    params: current,
                    meta_loss_curve: curve,
                    divergence: Some(format!("λ update became non-finite at meta-step {k}")),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let final_loss = meta_loss(&current, &eval_tasks);
    curve.push(final_loss);
    Ok(MetaTrainOutcome {
        params: current,
        meta_loss_curve: curve,
        divergence: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::Spectrum;

    fn quad_template() -> WorkloadConfig {
        WorkloadConfig::Quadratic {
            id: None,
            dim: 1,
            spectrum: Spectrum::Range { min: 0.5, max: 2.0 },
            rotate: false,
            step_hint: 50,
        }
    }

    #[test]
    fn linear_meta_loss_recovers_coefficients() {
        // F(λ) = cᵀλ has ∇F = c everywhere; the estimator should align.
        let dim = 10;
        let c: Vec<f64> = (0..dim).map(|i| (i as f64 - 4.5) * 0.3).collect();
        let lambda = vec![0.0; dim];
        let mut cosines = Vec::new();
        for seed in 0..5 {
            let est = es_gradient_estimate(
                &lambda,
                |l| l.iter().zip(c.iter()).map(|(a, b)| a * b).sum(),
                0.1,
                512,
                seed,
            )
            .unwrap();
            let dot: f64 = est.gradient.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
            let na: f64 = est.gradient.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            cosines.push(dot / (na * nb));
        }
        let mean = cosines.iter().sum::<f64>() / cosines.len() as f64;
        assert!(mean > 0.95, "mean cosine similarity {mean} too low: {cosines:?}");
    }

    #[test]
    fn constant_meta_loss_gives_exact_zero() {
        let est = es_gradient_estimate(&[1.0, 2.0, 3.0], |_| 4.2, 0.1, 64, 9).unwrap();
        assert!(est.gradient.iter().all(|g| *g == 0.0));
        assert_eq!(est.kept_pairs, 64);
    }

    #[test]
    fn antithetic_symmetry_exact() {
        let lambda = vec![0.5, -0.3, 1.1];
        let f = |l: &[f64]| l.iter().map(|v| v * v).sum::<f64>() + l[0] * l[1];
        let eps: Vec<Vec<f64>> = RngStream::new(3, "test.eps")
            .normals(8 * 3)
            .chunks(3)
            .map(|c| c.to_vec())
            .collect();
        let neg: Vec<Vec<f64>> = eps
            .iter()
            .map(|e| e.iter().map(|v| -v).collect())
            .collect();
        let a = es_gradient_estimate_with_eps(&lambda, f, 0.1, &eps).unwrap();
        let b = es_gradient_estimate_with_eps(&lambda, f, 0.1, &neg).unwrap();
        assert_eq!(a.gradient, b.gradient, "negating all ε must not change the estimate");
    }

    #[test]
    fn non_finite_pairs_discarded_and_counted() {
        let lambda = vec![0.0; 4];
        // NaN band is symmetric in λ so a pair dies or survives as a unit.
        let f = |l: &[f64]| {
            if l[0].abs() > 0.1 {
                f64::NAN
            } else {
                l.iter().sum()
            }
        };
        let est = es_gradient_estimate(&lambda, f, 0.1, 64, 5).unwrap();
        assert!(est.discarded_pairs > 0, "|ε₀| > 1 perturbations should be NaN");
        assert!(est.kept_pairs > 0);
        assert_eq!(est.kept_pairs + est.discarded_pairs, 64);
        assert!(est.gradient.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn all_pairs_discarded_is_estimation_error() {
        let err = es_gradient_estimate(&[0.0; 3], |_| f64::NAN, 0.1, 8, 1).unwrap_err();
        assert!(matches!(err, Error::Estimation(_)));
    }

    #[test]
    fn sigma_and_pair_preconditions() {
        assert!(matches!(
            es_gradient_estimate(&[0.0], |_| 0.0, 0.0, 8, 0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            es_gradient_estimate(&[0.0], |_| 0.0, 0.1, 0, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn meta_loss_zero_head_matches_untrained_baseline() {
        let opt = LearnedOptimizerParams::default_architecture(0);
        let dist = TaskDistribution {
            workload_template: quad_template(),
            inner_steps: 10,
            seed: 42,
        };
        let tasks = dist.sample("t", 4).unwrap();
        let f = meta_loss(&opt, &tasks);
        // no-op optimizer: final loss equals initial loss per task
        let mut expected = 0.0;
        for task in &tasks {
            let init = task.workload.init(task.seed);
            let l0 = task.workload.eval_metrics(&init)["train_loss"];
            expected += l0.ln_1p();
        }
        expected /= tasks.len() as f64;
        assert!((f - expected).abs() < 1e-12);
    }

    #[test]
    fn meta_train_zero_steps_returns_init() {
        let init = LearnedOptimizerParams::default_architecture(1);
        let dist = TaskDistribution {
            workload_template: quad_template(),
            inner_steps: 10,
            seed: 7,
        };
        let es = EsConfig {
            n_pairs: 2,
            tasks_per_step: 2,
            eval_tasks: 2,
            ..EsConfig::default()
        };
        let out = meta_train(init.clone(), &dist, &es, 0).unwrap();
        assert_eq!(out.params.mlp_weights, init.mlp_weights);
        assert_eq!(out.meta_loss_curve.len(), 1);
        assert!(out.divergence.is_none());
    }

    #[test]
    fn meta_train_deterministic() {
        let dist = TaskDistribution {
            workload_template: quad_template(),
            inner_steps: 10,
            seed: 11,
        };
        let es = EsConfig {
            n_pairs: 4,
            tasks_per_step: 2,
            eval_tasks: 2,
            ..EsConfig::default()
        };
        let a = meta_train(LearnedOptimizerParams::default_architecture(2), &dist, &es, 3).unwrap();
        let b = meta_train(LearnedOptimizerParams::default_architecture(2), &dist, &es, 3).unwrap();
        assert_eq!(a.params.mlp_weights, b.params.mlp_weights);
        assert_eq!(a.meta_loss_curve, b.meta_loss_curve);
    }
}
