//! Binary logistic regression on two synthetic Gaussian clusters.
//!
//! Cluster means sit at ±(separation/2) along a random unit direction; the
//! classes are balanced and split 80/20 into train/validation per class, so
//! the splits stay disjoint and balanced.

use super::{Direction, Workload};
use crate::error::{Error, Result};
use crate::params::{Batch, ParamVector};
use crate::rng::RngStream;
use rand::Rng;
use std::collections::BTreeMap;

pub struct LogisticRegressionWorkload {
    id: String,
    dim: usize,
    batch_size: usize,
    step_hint: u64,
    /// Row-major (n_train × dim) then labels, likewise for validation.
    train_x: Vec<f64>,
    train_y: Vec<f64>,
    val_x: Vec<f64>,
    val_y: Vec<f64>,
    n_train: usize,
}

impl LogisticRegressionWorkload {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: String,
        dim: usize,
        n_samples: usize,
        batch_size: usize,
        separation: f64,
        step_hint: u64,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("logreg requires dim >= 1"));
        }
        if n_samples < 10 {
            return Err(Error::config("logreg needs at least 10 samples to split"));
        }
        if batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !separation.is_finite() || separation < 0.0 {
            return Err(Error::Config(format!(
                "separation must be finite and >= 0, got {separation}"
            )));
        }

        let dir_stream = RngStream::new(seed, format!("{id}.direction"));
        let mut direction = dir_stream.normals(dim);
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in &mut direction {
            *v /= norm;
        }

        let per_class = n_samples / 2;
        let data_stream = RngStream::new(seed, format!("{id}.data"));
        let noise = data_stream.normals(2 * per_class * dim);

        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(2 * per_class);
        let mut ys: Vec<f64> = Vec::with_capacity(2 * per_class);
        for class in 0..2usize {
            let sign = if class == 0 { -1.0 } else { 1.0 };
            for s in 0..per_class {
                let base = (class * per_class + s) * dim;
                let row: Vec<f64> = (0..dim)
                    .map(|i| sign * 0.5 * separation * direction[i] + noise[base + i])
                    .collect();
                xs.push(row);
                ys.push(class as f64);
            }
        }

        // 80/20 split taken per class; samples are iid so order carries no signal.
        let train_per_class = (per_class * 4) / 5;
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        let mut val_x = Vec::new();
        let mut val_y = Vec::new();
        for class in 0..2usize {
            for s in 0..per_class {
                let idx = class * per_class + s;
                if s < train_per_class {
                    train_x.extend_from_slice(&xs[idx]);
                    train_y.push(ys[idx]);
                } else {
                    val_x.extend_from_slice(&xs[idx]);
                    val_y.push(ys[idx]);
                }
            }
        }
        let n_train = train_y.len();
        let n_val = val_y.len();
        if n_train == 0 || n_val == 0 {
            return Err(Error::config("logreg split produced an empty partition"));
        }
        Ok(Self {
            id,
            dim,
            batch_size,
            step_hint,
            train_x,
            train_y,
            val_x,
            val_y,
            n_train,
        })
    }

    fn unpack(&self, params: &ParamVector) -> Result<(Vec<f64>, f64)> {
        let ok = params.segments().len() == 2
            && params.segments()[0].name == "weights"
            && params.segments()[0].values.len() == self.dim
            && params.segments()[1].name == "bias"
            && params.segments()[1].values.len() == 1;
        if !ok {
            return Err(Error::Structure {
                expected: format!("weights[{}] bias[1]", self.dim),
                actual: params.structure_string(),
            });
        }
        Ok((
            params.segments()[0].values.clone(),
            params.segments()[1].values[0],
        ))
    }

    fn split_loss(&self, params: &ParamVector, xs: &[f64], ys: &[f64]) -> (f64, f64) {
        let (w, b) = match self.unpack(params) {
            Ok(v) => v,
            Err(_) => return (f64::NAN, f64::NAN),
        };
        let n = ys.len();
        let mut loss = 0.0;
        let mut correct = 0usize;
        for s in 0..n {
            let x = &xs[s * self.dim..(s + 1) * self.dim];
            let z: f64 = x.iter().zip(w.iter()).map(|(xi, wi)| xi * wi).sum::<f64>() + b;
            loss += bce(z, ys[s]);
            if (z > 0.0) == (ys[s] > 0.5) {
                correct += 1;
            }
        }
        (loss / n as f64, correct as f64 / n as f64)
    }
}

/// Numerically stable `−y·ln σ(z) − (1−y)·ln(1−σ(z))`.
fn bce(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Workload for LogisticRegressionWorkload {
    fn id(&self) -> &str {
        &self.id
    }

    fn init(&self, seed: u64) -> ParamVector {
        let scale = 1.0 / (self.dim as f64).sqrt();
        let mut weights = RngStream::new(seed, format!("{}.init", self.id)).normals(self.dim);
        for w in &mut weights {
            *w *= scale;
        }
        ParamVector::new(vec![
            crate::params::Segment {
                name: "weights".to_string(),
                values: weights,
            },
            crate::params::Segment {
                name: "bias".to_string(),
                values: vec![0.0],
            },
        ])
        .expect("non-empty by construction")
    }

    fn train_batch(&self, seed: u64, step: u64) -> Batch {
        let mut rng = RngStream::new(seed, format!("{}.batch.{step}", self.id)).rng();
        let mut inputs = Vec::with_capacity(self.batch_size * self.dim);
        let mut targets = Vec::with_capacity(self.batch_size);
        for _ in 0..self.batch_size {
            let idx = rng.random_range(0..self.n_train);
            inputs.extend_from_slice(&self.train_x[idx * self.dim..(idx + 1) * self.dim]);
            targets.push(self.train_y[idx]);
        }
        Batch::new(inputs, targets, self.batch_size).expect("batch dimensions consistent")
    }

    fn loss_and_grad(&self, params: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)> {
        let (w, b) = self.unpack(params)?;
        if batch.input_dim() != self.dim {
            return Err(Error::Structure {
                expected: format!("batch rows of width {}", self.dim),
                actual: format!("batch rows of width {}", batch.input_dim()),
            });
        }
        let n = batch.size;
        let mut loss = 0.0;
        let mut gw = vec![0.0; self.dim];
        let mut gb = 0.0;
        for s in 0..n {
            let x = batch.input_row(s);
            let y = batch.targets[s];
            let z: f64 = x.iter().zip(w.iter()).map(|(xi, wi)| xi * wi).sum::<f64>() + b;
            loss += bce(z, y);
            let dz = sigmoid(z) - y;
            for i in 0..self.dim {
                gw[i] += dz * x[i];
            }
            gb += dz;
        }
        let inv = 1.0 / n as f64;
        loss *= inv;
        for g in &mut gw {
            *g *= inv;
        }
        gb *= inv;
        let grad = ParamVector::new(vec![
            crate::params::Segment {
                name: "weights".to_string(),
                values: gw,
            },
            crate::params::Segment {
                name: "bias".to_string(),
                values: vec![gb],
            },
        ])?;
        if !loss.is_finite() {
            return Err(Error::numeric("logreg loss", "weights"));
        }
        grad.check_finite("logreg gradient")?;
        Ok((loss, grad))
    }

    fn eval_metrics(&self, params: &ParamVector) -> BTreeMap<String, f64> {
        let (train_loss, _) = self.split_loss(params, &self.train_x, &self.train_y);
        let (val_loss, val_acc) = self.split_loss(params, &self.val_x, &self.val_y);
        let mut m = BTreeMap::new();
        m.insert("train_loss".to_string(), train_loss);
        m.insert("validation_loss".to_string(), val_loss);
        m.insert("validation_accuracy".to_string(), val_acc);
        m
    }

    fn metric_directions(&self) -> BTreeMap<String, Direction> {
        let mut m = BTreeMap::new();
        m.insert("train_loss".to_string(), Direction::Minimize);
        m.insert("validation_loss".to_string(), Direction::Minimize);
        m.insert("validation_accuracy".to_string(), Direction::Maximize);
        m
    }

    fn step_hint(&self) -> u64 {
        self.step_hint
    }
}
