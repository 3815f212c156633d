//! Minimal reverse-mode differentiation over dense `f64` matrices, with the
//! Adam optimizer, a central-difference gradient checker and a JSON
//! checkpoint format for parameters.

mod adam;
mod checkpoint;
mod gradcheck;
mod matrix;
mod sparse;
mod tape;

use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, StoredTensor};
pub use gradcheck::{finite_diff_check, finite_diff_check_scaled, GradCheckReport};
pub use matrix::Matrix;
pub use sparse::{Input, InputMatrix, SparseRows, SPARSE_DENSITY};
pub use tape::{spmm_dense, Tape, Var, EPS_LOG, EPS_NORM};

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("expected {expected} values, found {found}")]
    BadData { expected: usize, found: usize },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar((usize, usize)),
    #[error("backward already ran on this tape; call zero_grad first")]
    BackwardTwice,
    #[error("dropout rate {0} is outside [0, 1)")]
    InvalidRate(f64),
    #[error("{0}: row index out of range")]
    BadIndex(&'static str),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl TensorError {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Self::Shape { op, left, right }
    }
}

/// A named model weight with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub trainable: bool,
}

/// Ordered parameter collection with unique names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Matrix, trainable: bool) -> Result<usize, TensorError> {
        if self.index_of(name).is_some() {
            return Err(TensorError::DuplicateParam(name.to_string()));
        }
        let (r, c) = value.shape();
        self.params.push(Parameter { name: name.to_string(), value, grad: Matrix::zeros(r, c), trainable });
        Ok(self.params.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn get(&self, idx: usize) -> &Parameter {
        &self.params[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Parameter {
        &mut self.params[idx]
    }

    pub fn value(&self, name: &str) -> Option<&Matrix> {
        self.index_of(name).map(|i| &self.params[i].value)
    }

    pub fn value_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.index_of(name).map(move |i| &mut self.params[i].value)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Adds the parameter-leaf gradients of a finished backward pass.
    pub fn accumulate_grads(&mut self, tape: &Tape<'_>) {
        for (idx, g) in tape.param_grads() {
            self.params[idx].grad.add_assign(g);
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }
}
