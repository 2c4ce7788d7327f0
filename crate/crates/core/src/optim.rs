//! Hand-crafted baseline optimizers and their learning-rate schedule.
//!
//! All five update rules are the standard textbook forms, written out over
//! [`ParamVector`] segments. Default hyperparameters follow the benchmark's
//! self-tuning regime: no per-workload search, one constant table.

use crate::error::{Error, Result};
use crate::params::ParamVector;
use serde::{Deserialize, Serialize};

/// `θ − lr·∇L`, leaving the inputs untouched.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector> {
    params.check_structure(grad)?;
    if !lr.is_finite() {
        return Err(Error::Precondition(format!("learning rate must be finite, got {lr}")));
    }
    let next = params.zip_map(grad, |t, g| t - lr * g)?;
    next.check_finite("sgd_step")?;
    Ok(next)
}

/// Linear warmup then cosine decay, expressed as fractions of a fixed length.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScheduleSpec {
    pub total_schedule_steps: u64,
    #[serde(default = "default_warmup_fraction")]
    pub warmup_fraction: f64,
    #[serde(default = "default_decay_fraction")]
    pub decay_fraction: f64,
    #[serde(default = "default_min_lr")]
    pub min_lr: f64,
}

fn default_warmup_fraction() -> f64 {
    0.05
}

fn default_decay_fraction() -> f64 {
    0.95
}

fn default_min_lr() -> f64 {
    1e-4
}

impl ScheduleSpec {
    pub fn new(total_schedule_steps: u64) -> Self {
        Self {
            total_schedule_steps,
            warmup_fraction: default_warmup_fraction(),
            decay_fraction: default_decay_fraction(),
            min_lr: default_min_lr(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_schedule_steps == 0 {
            return Err(Error::config("schedule length must be >= 1 step"));
        }
        if (self.warmup_fraction + self.decay_fraction - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "warmup_fraction {} + decay_fraction {} must equal 1",
                self.warmup_fraction, self.decay_fraction
            )));
        }
        if !(self.warmup_fraction >= 0.0) || !(self.min_lr >= 0.0) {
            return Err(Error::config("schedule fractions and min_lr must be non-negative"));
        }
        Ok(())
    }
}

/// Learning rate at `step` (0-based): linear ramp ending at `base_lr`, cosine
/// decay to `min_lr`, then flat `min_lr` past the schedule end.
pub fn schedule_lr(spec: &ScheduleSpec, base_lr: f64, step: u64) -> Result<f64> {
    spec.validate()?;
    let total = spec.total_schedule_steps;
    let warmup = (spec.warmup_fraction * total as f64).round() as u64;
    if step < warmup {
        // Starts at base_lr/W rather than 0 so the first step still moves.
        return Ok(base_lr * (step + 1) as f64 / warmup as f64);
    }
    if step < total {
        let span = (total - warmup) as f64;
        let phase = (step - warmup) as f64 / span;
        return Ok(spec.min_lr
            + 0.5 * (base_lr - spec.min_lr) * (1.0 + (std::f64::consts::PI * phase).cos()));
    }
    Ok(spec.min_lr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Adam,
    Nadam,
    Nadamw,
    HeavyBall,
    Nesterov,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Adam,
        Algorithm::Nadam,
        Algorithm::Nadamw,
        Algorithm::HeavyBall,
        Algorithm::Nesterov,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Adam => "adam",
            Algorithm::Nadam => "nadam",
            Algorithm::Nadamw => "nadamw",
            Algorithm::HeavyBall => "heavy_ball",
            Algorithm::Nesterov => "nesterov",
        }
    }

    fn is_adam_family(&self) -> bool {
        matches!(self, Algorithm::Adam | Algorithm::Nadam | Algorithm::Nadamw)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(Algorithm::Adam),
            "nadam" => Ok(Algorithm::Nadam),
            "nadamw" => Ok(Algorithm::Nadamw),
            "heavy_ball" => Ok(Algorithm::HeavyBall),
            "nesterov" => Ok(Algorithm::Nesterov),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BaselineHyperparams {
    pub algorithm: Algorithm,
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay; nonzero only for NAdamW by default.
    pub decoupled_weight_decay: f64,
    pub schedule: Option<ScheduleSpec>,
}

impl BaselineHyperparams {
    /// Stock settings: lr 5e-3 (Adam), 1e-2 (NAdam/NAdamW), 5e-2 (momentum
    /// methods); β₁ 0.9, β₂ 0.999, ε 1e-8, weight decay 4e-3 on NAdamW only.
    /// Adam-family methods get a warmup+cosine schedule over 75% of the
    /// workload step hint; the momentum methods run at constant lr.
    pub fn defaults(algorithm: Algorithm, step_hint: u64) -> Self {
        let base_lr = match algorithm {
            Algorithm::Adam => 5e-3,
            Algorithm::Nadam | Algorithm::Nadamw => 1e-2,
            Algorithm::HeavyBall | Algorithm::Nesterov => 5e-2,
        };
        let schedule = if algorithm.is_adam_family() {
            Some(ScheduleSpec::new(((step_hint as f64) * 0.75).floor().max(1.0) as u64))
        } else {
            None
        };
        Self {
            algorithm,
            base_lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decoupled_weight_decay: if algorithm == Algorithm::Nadamw { 4e-3 } else { 0.0 },
            schedule,
        }
    }
}

/// Per-trial mutable optimizer buffers; all share the parameter structure.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub step: u64,
    pub first_moment: ParamVector,
    pub second_moment: ParamVector,
    pub velocity: ParamVector,
}

impl OptimizerState {
    pub fn new(params: &ParamVector) -> Self {
        Self {
            step: 0,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            velocity: params.zeros_like(),
        }
    }
}

/// One optimizer update. Returns the new parameters and advanced state;
/// inputs are not mutated.
pub fn baseline_step(
    hp: &BaselineHyperparams,
    state: &OptimizerState,
    params: &ParamVector,
    grad: &ParamVector,
) -> Result<(ParamVector, OptimizerState)> {
    params.check_structure(grad)?;
    params.check_structure(&state.first_moment)?;
    let t = state.step + 1;
    let lr = match &hp.schedule {
        Some(spec) => schedule_lr(spec, hp.base_lr, state.step)?,
        None => hp.base_lr,
    };

    let mut next_state = state.clone();
    next_state.step = t;

    let next_params = match hp.algorithm {
        Algorithm::Adam | Algorithm::Nadam | Algorithm::Nadamw => {
            let (b1, b2, eps) = (hp.beta1, hp.beta2, hp.epsilon);
            let m = state.first_moment.zip_map(grad, |m, g| b1 * m + (1.0 - b1) * g)?;
            let v = state
                .second_moment
                .zip_map(grad, |v, g| b2 * v + (1.0 - b2) * g * g)?;
            let bias1 = 1.0 - b1.powi(t as i32);
            let bias2 = 1.0 - b2.powi(t as i32);
            // NAdam looks one momentum application ahead of the fresh buffer.
            let numerator = if hp.algorithm == Algorithm::Adam {
                m.clone()
            } else {
                m.zip_map(grad, |m, g| b1 * m + (1.0 - b1) * g)?
            };
            let wd = if hp.algorithm == Algorithm::Nadamw {
                hp.decoupled_weight_decay
            } else {
                0.0
            };
            let mut next = params.clone();
            {
                let flat_n = numerator.to_flat();
                let flat_v = v.to_flat();
                for (i, p) in next.values_mut().enumerate() {
                    let m_hat = flat_n[i] / bias1;
                    let v_hat = flat_v[i] / bias2;
                    *p = *p - lr * m_hat / (v_hat.sqrt() + eps) - lr * wd * *p;
                }
            }
            next_state.first_moment = m;
            next_state.second_moment = v;
            next
        }
        Algorithm::HeavyBall => {
            let v = state.velocity.zip_map(grad, |v, g| hp.beta1 * v + g)?;
            let next = params.zip_map(&v, |p, vi| p - lr * vi)?;
            next_state.velocity = v;
            next
        }
        Algorithm::Nesterov => {
            let v = state.velocity.zip_map(grad, |v, g| hp.beta1 * v + g)?;
            let next = {
                let flat_v = v.to_flat();
                let flat_g = grad.to_flat();
                let mut next = params.clone();
                for (i, p) in next.values_mut().enumerate() {
                    *p -= lr * (flat_g[i] + hp.beta1 * flat_v[i]);
                }
                next
            };
            next_state.velocity = v;
            next
        }
    };

    if let Some(segment) = next_params.first_non_finite_segment() {
        return Err(Error::numeric(
            format!("{} update", hp.algorithm.name()),
            segment.to_string(),
        ));
    }
    Ok((next_params, next_state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Batch;
    use crate::workloads::{make_workload, Spectrum, WorkloadConfig};
    use proptest::prelude::*;

    fn pv(values: &[f64]) -> ParamVector {
        ParamVector::from_flat("theta", values.to_vec()).unwrap()
    }

    #[test]
    fn sgd_zero_lr_is_identity() {
        let out = sgd_step(&pv(&[1.0, 2.0]), &pv(&[1.0, 1.0]), 0.0).unwrap();
        assert_eq!(out.to_flat(), vec![1.0, 2.0]);
    }

    #[test]
    fn sgd_direct_arithmetic() {
        let out = sgd_step(&pv(&[1.0, 2.0]), &pv(&[0.5, -1.0]), 0.1).unwrap();
        assert!((out.to_flat()[0] - 0.95).abs() < 1e-15);
        assert!((out.to_flat()[1] - 2.1).abs() < 1e-15);
    }

    #[test]
    fn sgd_newton_exact_on_identity_bowl() {
        // L = ½‖θ‖² has ∇L = θ, so lr=1 lands on the minimizer.
        let out = sgd_step(&pv(&[4.0]), &pv(&[4.0]), 1.0).unwrap();
        assert_eq!(out.to_flat(), vec![0.0]);
    }

    #[test]
    fn sgd_structure_mismatch_rejected() {
        let a = pv(&[1.0]);
        let b = ParamVector::from_flat("other", vec![1.0]).unwrap();
        assert!(matches!(sgd_step(&a, &b, 0.1), Err(Error::Structure { .. })));
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let spec = ScheduleSpec::new(1000);
        // warmup endpoint reaches base LR
        assert!((schedule_lr(&spec, 1e-2, 49).unwrap() - 1e-2).abs() < 1e-15);
        // past the end, stays at the floor
        assert!((schedule_lr(&spec, 1e-2, 1000).unwrap() - 1e-4).abs() < 1e-15);
        assert!((schedule_lr(&spec, 1e-2, 5000).unwrap() - 1e-4).abs() < 1e-15);
        // cosine midpoint: W + (total-W)/2 with W=50
        let mid = 50 + (1000 - 50) / 2;
        assert!((schedule_lr(&spec, 1e-2, mid).unwrap() - 5.05e-3).abs() < 1e-10);
    }

    #[test]
    fn schedule_zero_length_is_config_error() {
        let mut spec = ScheduleSpec::new(1);
        spec.total_schedule_steps = 0;
        assert!(matches!(schedule_lr(&spec, 1e-2, 0), Err(Error::Config(_))));
    }

    #[test]
    fn adam_first_step_bias_corrected() {
        let mut hp = BaselineHyperparams::defaults(Algorithm::Adam, 100);
        hp.schedule = None;
        let params = pv(&[0.0]);
        let state = OptimizerState::new(&params);
        let (next, next_state) = baseline_step(&hp, &state, &params, &pv(&[1.0])).unwrap();
        let expected = -5e-3 * (1.0 / (1.0 + 1e-8));
        assert!(
            (next.to_flat()[0] - expected).abs() < 1e-15,
            "got {}, want {expected}",
            next.to_flat()[0]
        );
        assert_eq!(next_state.step, 1);
    }

    #[test]
    fn heavy_ball_first_step_is_sgd() {
        let hp = BaselineHyperparams::defaults(Algorithm::HeavyBall, 100);
        let params = pv(&[0.0]);
        let state = OptimizerState::new(&params);
        let (next, next_state) = baseline_step(&hp, &state, &params, &pv(&[2.0])).unwrap();
        assert!((next.to_flat()[0] + 0.1).abs() < 1e-15);
        assert_eq!(next_state.velocity.to_flat(), vec![2.0]);
    }

    #[test]
    fn nesterov_first_step_lookahead() {
        let hp = BaselineHyperparams::defaults(Algorithm::Nesterov, 100);
        let params = pv(&[0.0]);
        let state = OptimizerState::new(&params);
        let (next, _) = baseline_step(&hp, &state, &params, &pv(&[1.0])).unwrap();
        // lr·(g + β₁·v') = 0.05·1.9
        assert!((next.to_flat()[0] + 0.095).abs() < 1e-15);
    }

    #[test]
    fn nadamw_decay_pulls_toward_zero() {
        let mut hp = BaselineHyperparams::defaults(Algorithm::Nadamw, 100);
        hp.schedule = None;
        let params = pv(&[10.0]);
        let state = OptimizerState::new(&params);
        let (next, _) = baseline_step(&hp, &state, &params, &pv(&[0.0])).unwrap();
        // zero gradient, so only the decay term acts: θ(1 − lr·wd)
        let expected = 10.0 * (1.0 - 1e-2 * 4e-3);
        assert!((next.to_flat()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn all_baselines_reduce_to_sgd_without_momentum() {
        let params = pv(&[0.7, -1.3, 2.0]);
        let grad = pv(&[0.4, -0.2, 1.5]);
        let lr = 0.03;
        for algorithm in Algorithm::ALL {
            let hp = BaselineHyperparams {
                algorithm,
                base_lr: lr,
                beta1: 0.0,
                beta2: 0.0,
                epsilon: 1e-8,
                decoupled_weight_decay: 0.0,
                schedule: None,
            };
            let state = OptimizerState::new(&params);
            let (next, _) = baseline_step(&hp, &state, &params, &grad).unwrap();
            let reference = if algorithm.is_adam_family() {
                // with β₁=β₂=0 the update is lr·g/(|g|+ε)
                let folded = grad.map(|g| g / (g.abs() + 1e-8));
                sgd_step(&params, &folded, lr).unwrap()
            } else {
                sgd_step(&params, &grad, lr).unwrap()
            };
            for (a, b) in next.values().zip(reference.values()) {
                assert!(
                    (a - b).abs() <= 1e-15,
                    "{}: {a} vs {b}",
                    algorithm.name()
                );
            }
        }
    }

    #[test]
    fn defaults_match_stock_table() {
        let adam = BaselineHyperparams::defaults(Algorithm::Adam, 1000);
        assert_eq!(adam.base_lr, 5e-3);
        assert!(adam.schedule.is_some());
        assert_eq!(adam.schedule.as_ref().unwrap().total_schedule_steps, 750);
        let nadamw = BaselineHyperparams::defaults(Algorithm::Nadamw, 1000);
        assert_eq!(nadamw.base_lr, 1e-2);
        assert_eq!(nadamw.decoupled_weight_decay, 4e-3);
        let nadam = BaselineHyperparams::defaults(Algorithm::Nadam, 1000);
        assert_eq!(nadam.base_lr, 1e-2);
        assert_eq!(nadam.decoupled_weight_decay, 0.0);
        for alg in [Algorithm::HeavyBall, Algorithm::Nesterov] {
            let hp = BaselineHyperparams::defaults(alg, 1000);
            assert_eq!(hp.base_lr, 5e-2);
            assert_eq!(hp.beta1, 0.9);
            assert!(hp.schedule.is_none(), "momentum methods run at constant lr");
        }
    }

    #[test]
    fn all_baselines_converge_on_quadratic() {
        let step_hint = 3000;
        let cfg = WorkloadConfig::Quadratic {
            id: None,
            dim: 4,
            spectrum: Spectrum::Eigenvalues(vec![0.5, 1.0, 1.5, 2.0]),
            rotate: false,
            step_hint,
        };
        let w = make_workload(&cfg, 0).unwrap();
        for algorithm in Algorithm::ALL {
            let hp = BaselineHyperparams::defaults(algorithm, step_hint);
            let mut params = w.init(0);
            let mut state = OptimizerState::new(&params);
            let mut final_loss = f64::INFINITY;
            for step in 0..step_hint {
                let batch = w.train_batch(0, step);
                let (loss, grad) = w.loss_and_grad(&params, &batch).unwrap();
                final_loss = loss;
                let (p, s) = baseline_step(&hp, &state, &params, &grad).unwrap();
                params = p;
                state = s;
            }
            assert!(
                final_loss < 1e-3,
                "{} should reach loss < 1e-3 within {step_hint} steps, got {final_loss}",
                algorithm.name()
            );
        }
    }

    proptest! {
        #[test]
        fn schedule_continuous_and_decreasing(total in 20u64..5000, base in 1e-4f64..1.0) {
            let spec = ScheduleSpec::new(total);
            let warmup = (0.05 * total as f64).round() as u64;
            prop_assume!(warmup >= 1 && warmup < total);
            // boundary continuity
            let end_of_warmup = schedule_lr(&spec, base, warmup - 1).unwrap();
            let start_of_cosine = schedule_lr(&spec, base, warmup).unwrap();
            prop_assert!((end_of_warmup - base).abs() < 1e-12);
            prop_assert!((start_of_cosine - base).abs() < 1e-12);
            // non-increasing over the cosine segment
            let mut prev = start_of_cosine;
            for step in warmup..total {
                let lr = schedule_lr(&spec, base, step).unwrap();
                prop_assert!(lr <= prev + 1e-15);
                prev = lr;
            }
        }

        #[test]
        fn sgd_descends_quadratic_below_stability_limit(
            lr_frac in 0.01f64..0.99,
            seed in 0u64..100,
        ) {
            let cfg = WorkloadConfig::Quadratic {
                id: None,
                dim: 3,
                spectrum: Spectrum::Range { min: 0.5, max: 2.0 },
                rotate: true,
                step_hint: 10,
            };
            let w = make_workload(&cfg, seed).unwrap();
            let lr = lr_frac * 2.0 / 2.0; // λ_max ≤ 2 so lr < 2/λ_max
            let mut params = w.init(seed);
            let (mut prev_loss, _) = w.loss_and_grad(&params, &Batch::empty()).unwrap();
            for _ in 0..20 {
                let (_, grad) = w.loss_and_grad(&params, &Batch::empty()).unwrap();
                params = sgd_step(&params, &grad, lr).unwrap();
                let (loss, _) = w.loss_and_grad(&params, &Batch::empty()).unwrap();
                prop_assert!(loss < prev_loss, "loss must strictly decrease: {prev_loss} -> {loss}");
                prev_loss = loss;
            }
        }
    }
}
