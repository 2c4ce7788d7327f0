//! Flat parameter vectors with named tensor segments, and data batches.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One named run of contiguous values inside a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub values: Vec<f64>,
}

/// A finite-dimensional parameter vector split into named segments.
///
/// All optimizer state buffers mirror the segment structure of the parameters
/// they track, so elementwise operations can report which segment misbehaved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    segments: Vec<Segment>,
}

impl ParamVector {
    /// Build from named segments. Total dimension must be at least 1.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let total: usize = segments.iter().map(|s| s.values.len()).sum();
        if total == 0 {
            return Err(Error::config("parameter vector must have total_dim >= 1"));
        }
        Ok(Self { segments })
    }

    /// Single-segment convenience constructor.
    pub fn from_flat(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![Segment {
            name: name.into(),
            values,
        }])
    }

    pub fn total_dim(&self) -> usize {
        self.segments.iter().map(|s| s.values.len()).sum()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Iterate over all values in segment order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().flat_map(|s| s.values.iter().copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.segments.iter_mut().flat_map(|s| s.values.iter_mut())
    }

    /// Copy of all values as one flat vector.
    pub fn to_flat(&self) -> Vec<f64> {
        self.values().collect()
    }

    /// Short description of the segment structure, for error messages.
    pub fn structure_string(&self) -> String {
        let parts: Vec<String> = self
            .segments
            .iter()
            .map(|s| format!("{}[{}]", s.name, s.values.len()))
            .collect();
        parts.join(",")
    }

    pub fn same_structure(&self, other: &ParamVector) -> bool {
        self.segments.len() == other.segments.len()
            && self
                .segments
                .iter()
                .zip(&other.segments)
                .all(|(a, b)| a.name == b.name && a.values.len() == b.values.len())
    }

    /// Error unless `other` shares this vector's segment structure.
    pub fn check_structure(&self, other: &ParamVector) -> Result<()> {
        if self.same_structure(other) {
            Ok(())
        } else {
            Err(Error::Structure {
                expected: self.structure_string(),
                actual: other.structure_string(),
            })
        }
    }

    /// Zero vector with the same segment structure.
    pub fn zeros_like(&self) -> ParamVector {
        self.map(|_| 0.0)
    }

    /// Elementwise map preserving structure.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ParamVector {
        ParamVector {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    name: s.name.clone(),
                    values: s.values.iter().map(|&v| f(v)).collect(),
                })
                .collect(),
        }
    }

    /// Elementwise combination of two structurally identical vectors.
    pub fn zip_map(&self, other: &ParamVector, f: impl Fn(f64, f64) -> f64) -> Result<ParamVector> {
        self.check_structure(other)?;
        Ok(ParamVector {
            segments: self
                .segments
                .iter()
                .zip(&other.segments)
                .map(|(a, b)| Segment {
                    name: a.name.clone(),
                    values: a
                        .values
                        .iter()
                        .zip(&b.values)
                        .map(|(&x, &y)| f(x, y))
                        .collect(),
                })
                .collect(),
        })
    }

    /// Name of the first segment containing a NaN or infinity, if any.
    pub fn first_non_finite_segment(&self) -> Option<&str> {
        self.segments
            .iter()
            .find(|s| s.values.iter().any(|v| !v.is_finite()))
            .map(|s| s.name.as_str())
    }

    /// Reject NaN/Inf at an update boundary, naming the offending segment.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        match self.first_non_finite_segment() {
            None => Ok(()),
            Some(seg) => Err(Error::numeric(context, seg)),
        }
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.check_structure(other)?;
        Ok(self
            .values()
            .zip(other.values())
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn norm_inf(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One minibatch of training data. Inputs and targets are stored row-major
/// with `size` rows; workloads without data use an empty batch of size 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub size: usize,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        if inputs.len() % size != 0 || targets.len() % size != 0 {
            return Err(Error::config(format!(
                "batch rows do not divide evenly: {} inputs, {} targets, size {}",
                inputs.len(),
                targets.len(),
                size
            )));
        }
        Ok(Self {
            inputs,
            targets,
            size,
        })
    }

    /// Placeholder batch for data-free workloads.
    pub fn empty() -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
            size: 1,
        }
    }

    /// Width of one input row.
    pub fn input_dim(&self) -> usize {
        self.inputs.len() / self.size
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.inputs[i * d..(i + 1) * d]
    }
}
