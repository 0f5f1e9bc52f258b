use serde::{Deserialize, Serialize};

use super::tensor::Matrix;
use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub value: Matrix,
}

/// Ordered collection of every trainable tensor of a model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    tensors: Vec<NamedTensor>,
}

impl ParamStore {
    pub fn push(&mut self, name: impl Into<String>, value: Matrix) -> usize {
        self.tensors.push(NamedTensor {
            name: name.into(),
            value,
        });
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensor(&self, index: usize) -> &Matrix {
        &self.tensors[index].value
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut Matrix {
        &mut self.tensors[index].value
    }

    pub fn named(&self) -> &[NamedTensor] {
        &self.tensors
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.value.data.iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<(), ModelError> {
        if values.len() != self.num_scalars() {
            return Err(ModelError::ShapeMismatch {
                expected: self.num_scalars(),
                found: values.len(),
            });
        }
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.value.len();
            t.value.data.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Maps a flat scalar index onto `(tensor index, offset within tensor)`.
    pub fn locate(&self, mut flat_index: usize) -> Option<(usize, usize)> {
        for (i, t) in self.tensors.iter().enumerate() {
            if flat_index < t.value.len() {
                return Some((i, flat_index));
            }
            flat_index -= t.value.len();
        }
        None
    }

    pub fn zeros_like(&self) -> Gradients {
        Gradients {
            tensors: self
                .tensors
                .iter()
                .map(|t| Matrix::zeros(t.value.rows, t.value.cols))
                .collect(),
        }
    }
}

/// Gradient tensors aligned index-for-index with a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Matrix>,
}

impl Gradients {
    pub fn accumulate(&mut self, partial: Vec<Option<Matrix>>) {
        for (dst, src) in self.tensors.iter_mut().zip(partial) {
            if let Some(src) = src {
                dst.add_assign(&src);
            }
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            dst.add_assign(src);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().map(Matrix::sum_squares).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            for v in &mut t.data {
                *v *= s;
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }
}
