//! Convex quadratic bowl `L(θ) = ½ θᵀAθ` with a configurable spectrum.
//!
//! The optimum is θ = 0 with loss 0, so convergence claims can be checked
//! exactly. With `rotate` the eigenbasis is a random orthogonal matrix,
//! otherwise A is diagonal.

use super::{Direction, Spectrum, Workload};
use crate::error::{Error, Result};
use crate::params::{Batch, ParamVector};
use crate::rng::RngStream;
use std::collections::BTreeMap;

pub struct QuadraticWorkload {
    id: String,
    dim: usize,
    /// Row-major dim×dim symmetric positive definite matrix.
    a: Vec<f64>,
    lambda_max: f64,
    step_hint: u64,
}

impl QuadraticWorkload {
    pub fn new(
        id: String,
        dim: usize,
        spectrum: &Spectrum,
        rotate: bool,
        step_hint: u64,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("quadratic workload requires dim >= 1"));
        }
        let eigenvalues = match spectrum {
            Spectrum::Eigenvalues(vals) => {
                if vals.len() != dim {
                    return Err(Error::Config(format!(
                        "spectrum lists {} eigenvalues for dim {dim}",
                        vals.len()
                    )));
                }
                if vals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::config(
                        "quadratic spectrum must be strictly positive and finite",
                    ));
                }
                vals.clone()
            }
            Spectrum::Range { min, max } => {
                if !(*min > 0.0) || !(max >= min) || !max.is_finite() {
                    return Err(Error::Config(format!(
                        "spectrum range [{min}, {max}] is not positive definite"
                    )));
                }
                RngStream::new(seed, format!("{id}.spectrum")).uniforms(dim, *min, *max)
            }
        };
        let lambda_max = eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let a = if rotate {
            let q = random_orthogonal(dim, &RngStream::new(seed, format!("{id}.rotation")));
            // A = Σ_k λ_k v_k v_kᵀ over the orthonormal rows v_k of Q.
            let mut a = vec![0.0; dim * dim];
            for (k, lambda) in eigenvalues.iter().enumerate() {
                let row = &q[k * dim..(k + 1) * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        a[i * dim + j] += lambda * row[i] * row[j];
                    }
                }
            }
            a
        } else {
            let mut a = vec![0.0; dim * dim];
            for (i, lambda) in eigenvalues.iter().enumerate() {
                a[i * dim + i] = *lambda;
            }
            a
        };
        Ok(Self {
            id,
            dim,
            a,
            lambda_max,
            step_hint,
        })
    }

    /// Loss value at the analytic minimizer θ = 0.
    pub fn optimum_loss(&self) -> f64 {
        0.0
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn objective(&self, params: &ParamVector) -> Result<(f64, Vec<f64>)> {
        if params.total_dim() != self.dim {
            return Err(Error::Structure {
                expected: format!("theta[{}]", self.dim),
                actual: params.structure_string(),
            });
        }
        let theta = params.to_flat();
        let mut a_theta = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.a[i * self.dim + j] * theta[j];
            }
            a_theta[i] = acc;
        }
        let loss = 0.5
            * theta
                .iter()
                .zip(a_theta.iter())
                .map(|(t, at)| t * at)
                .sum::<f64>();
        if !loss.is_finite() {
            return Err(Error::numeric("quadratic loss", "theta"));
        }
        Ok((loss, a_theta))
    }
}

/// Orthonormal rows by Gram-Schmidt of a Gaussian matrix.
fn random_orthogonal(dim: usize, stream: &RngStream) -> Vec<f64> {
    let mut q = stream.normals(dim * dim);
    for k in 0..dim {
        for prev in 0..k {
            let dot: f64 = (0..dim).map(|i| q[k * dim + i] * q[prev * dim + i]).sum();
            for i in 0..dim {
                q[k * dim + i] -= dot * q[prev * dim + i];
            }
        }
        let norm: f64 = (0..dim)
            .map(|i| q[k * dim + i] * q[k * dim + i])
            .sum::<f64>()
            .sqrt();
        for i in 0..dim {
            q[k * dim + i] /= norm;
        }
    }
    q
}

impl Workload for QuadraticWorkload {
    fn id(&self) -> &str {
        &self.id
    }

    fn init(&self, seed: u64) -> ParamVector {
        let values = RngStream::new(seed, format!("{}.init", self.id)).normals(self.dim);
        ParamVector::from_flat("theta", values).expect("dim >= 1 checked at construction")
    }

    fn train_batch(&self, _seed: u64, _step: u64) -> Batch {
        // The objective is data-free; every batch is the full objective.
        Batch::empty()
    }

    fn loss_and_grad(&self, params: &ParamVector, _batch: &Batch) -> Result<(f64, ParamVector)> {
        let (loss, a_theta) = self.objective(params)?;
        let grad = ParamVector::from_flat("theta", a_theta)?;
        grad.check_finite("quadratic gradient")?;
        Ok((loss, grad))
    }

    fn eval_metrics(&self, params: &ParamVector) -> BTreeMap<String, f64> {
        let loss = self.objective(params).map(|(l, _)| l).unwrap_or(f64::NAN);
        let mut m = BTreeMap::new();
        m.insert("train_loss".to_string(), loss);
        m.insert("validation_loss".to_string(), loss);
        m
    }

    fn metric_directions(&self) -> BTreeMap<String, Direction> {
        let mut m = BTreeMap::new();
        m.insert("train_loss".to_string(), Direction::Minimize);
        m.insert("validation_loss".to_string(), Direction::Minimize);
        m
    }

    fn step_hint(&self) -> u64 {
        self.step_hint
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotated_matrix_keeps_spectrum_trace() {
        let w = QuadraticWorkload::new(
            "q".into(),
            4,
            &Spectrum::Eigenvalues(vec![0.5, 1.0, 1.5, 2.0]),
            true,
            100,
            7,
        )
        .unwrap();
        let trace: f64 = (0..4).map(|i| w.a[i * 4 + i]).sum();
        assert!((trace - 5.0).abs() < 1e-9, "trace {trace} should equal eigenvalue sum");
        // symmetry
        for i in 0..4 {
            for j in 0..4 {
                assert!((w.a[i * 4 + j] - w.a[j * 4 + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_direction_positive_definite() {
        let w = QuadraticWorkload::new(
            "q".into(),
            3,
            &Spectrum::Range { min: 0.5, max: 2.0 },
            true,
            100,
            3,
        )
        .unwrap();
        let theta = w.init(1);
        let (loss, grad) = w.loss_and_grad(&theta, &Batch::empty()).unwrap();
        assert!(loss > 0.0);
        // ∇L·θ = θᵀAθ = 2L > 0 for θ ≠ 0
        assert!((grad.dot(&theta).unwrap() - 2.0 * loss).abs() < 1e-9);
    }

    #[test]
    fn structure_mismatch_reported() {
        let w = QuadraticWorkload::new(
            "q".into(),
            2,
            &Spectrum::Eigenvalues(vec![1.0, 1.0]),
            false,
            100,
            0,
        )
        .unwrap();
        let bad = ParamVector::from_flat("theta", vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            w.loss_and_grad(&bad, &Batch::empty()),
            Err(Error::Structure { .. })
        ));
    }
}
