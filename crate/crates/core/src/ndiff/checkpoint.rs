use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Matrix, ParamStore, TensorError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredTensor {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// Parameter name → row-major tensor. Floats are written in shortest
/// round-trip form, so save/load is bit-exact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn from_params(params: &ParamStore) -> Self {
        let tensors = params
            .iter()
            .map(|p| {
                let (r, c) = p.value.shape();
                (p.name.clone(), StoredTensor { shape: [r, c], values: p.value.data().to_vec() })
            })
            .collect();
        Self { tensors }
    }

    pub fn matrix(&self, name: &str) -> Result<Matrix, TensorError> {
        let t = self.tensors.get(name).ok_or_else(|| TensorError::Checkpoint(format!("missing tensor {name:?}")))?;
        Matrix::from_vec(t.shape[0], t.shape[1], t.values.clone())
    }

    /// Overwrites every parameter of `params` with the stored value of the
    /// same name and shape.
    pub fn restore_into(&self, params: &mut ParamStore) -> Result<(), TensorError> {
        for p in params.iter_mut() {
            let m = self.matrix(&p.name)?;
            if m.shape() != p.value.shape() {
                return Err(TensorError::Checkpoint(format!(
                    "{}: stored shape {:?}, expected {:?}",
                    p.name,
                    m.shape(),
                    p.value.shape()
                )));
            }
            p.value = m;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, TensorError> {
        let ck: Self = serde_json::from_str(text).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
        for (name, t) in &ck.tensors {
            if t.shape[0] * t.shape[1] != t.values.len() {
                return Err(TensorError::Checkpoint(format!("{name}: shape does not match value count")));
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TensorError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| TensorError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
