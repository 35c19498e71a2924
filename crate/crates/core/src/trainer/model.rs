use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Linear map `W x + b` applied to frozen base embeddings before cosine
/// scoring. `W` is stored row-major, `dim_out` rows of `dim_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    dim_in: usize,
    dim_out: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    pub metadata: Value,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    dim_in: usize,
    dim_out: usize,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default)]
    metadata: Value,
}

impl ProjectionModel {
    pub fn from_parts(dim_in: usize, dim_out: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if weights.len() != dim_in * dim_out {
            return Err(Error::DimensionMismatch {
                expected: dim_in * dim_out,
                actual: weights.len(),
            });
        }
        if bias.len() != dim_out {
            return Err(Error::DimensionMismatch {
                expected: dim_out,
                actual: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|x| !x.is_finite()) {
            return Err(Error::invalid("model has non-finite parameters"));
        }
        Ok(ProjectionModel {
            dim_in,
            dim_out,
            weights,
            bias,
            metadata: Value::Null,
        })
    }

    /// Top-left identity, zeros elsewhere, zero bias. With `dim_out >= dim_in`
    /// cosine scores equal raw base-embedding cosines.
    pub fn identity_padded(dim_in: usize, dim_out: usize) -> Result<Self> {
        let mut weights = vec![0.0; dim_in * dim_out];
        for i in 0..dim_in.min(dim_out) {
            weights[i * dim_in + i] = 1.0;
        }
        Self::from_parts(dim_in, dim_out, weights, vec![0.0; dim_out])
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.bias)
    }

    pub fn encode(&self, base: &[f64]) -> Result<Vec<f64>> {
        if base.len() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                actual: base.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.dim_in)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(base).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            w: self.weights.chunks_exact(self.dim_in).map(<[f64]>::to_vec).collect(),
            b: self.bias.clone(),
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(json)?;
        if file.w.len() != file.dim_out || file.w.iter().any(|r| r.len() != file.dim_in) {
            return Err(Error::invalid(format!("W is not {}x{}", file.dim_out, file.dim_in)));
        }
        let mut model = Self::from_parts(file.dim_in, file.dim_out, file.w.concat(), file.b)?;
        model.metadata = file.metadata;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
