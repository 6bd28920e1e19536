//! Message-passing weights: JSON tensor file or seeded initialization.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ReasoningError;

pub const WEIGHTS_FORMAT: &str = "rxngraph-gnn-v1";

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ReasoningError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(ReasoningError::Config("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `out += self · v`
    pub fn mul_add(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    /// dim × dim, applied to neighbor embeddings.
    pub w1: Matrix,
    /// dim × edge_dim, applied to edge features.
    pub w2: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnWeights {
    pub format: String,
    pub dim: usize,
    pub edge_dim: usize,
    pub layers: Vec<LayerWeights>,
}

impl GnnWeights {
    /// Uniform Glorot initialization from a ChaCha8 stream.
    pub fn seeded(dim: usize, edge_dim: usize, layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Matrix {
                rows,
                cols,
                data: (0..rows * cols)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect(),
            }
        };
        let layers = (0..layers)
            .map(|_| LayerWeights {
                w1: fill(dim, dim),
                w2: fill(dim, edge_dim),
            })
            .collect();
        GnnWeights {
            format: WEIGHTS_FORMAT.into(),
            dim,
            edge_dim,
            layers,
        }
    }

    pub fn zeros(dim: usize, edge_dim: usize, layers: usize) -> Self {
        GnnWeights {
            format: WEIGHTS_FORMAT.into(),
            dim,
            edge_dim,
            layers: (0..layers)
                .map(|_| LayerWeights {
                    w1: Matrix::zeros(dim, dim),
                    w2: Matrix::zeros(dim, edge_dim),
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ReasoningError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReasoningError::Config(format!("weights {}: {e}", path.display())))?;
        let w: GnnWeights = serde_json::from_str(&text)
            .map_err(|e| ReasoningError::Config(format!("weights {}: {e}", path.display())))?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weights serialize")
    }

    /// Header and every matrix shape must agree.
    pub fn validate(&self) -> Result<(), ReasoningError> {
        if self.format != WEIGHTS_FORMAT {
            return Err(ReasoningError::Config(format!(
                "unknown weights format '{}'",
                self.format
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let ok = l.w1.rows == self.dim
                && l.w1.cols == self.dim
                && l.w2.rows == self.dim
                && l.w2.cols == self.edge_dim
                && l.w1.data.len() == self.dim * self.dim
                && l.w2.data.len() == self.dim * self.edge_dim;
            if !ok {
                return Err(ReasoningError::Config(format!(
                    "layer {i}: expected W1 {d}x{d} and W2 {d}x{e}, got W1 {}x{} and W2 {}x{}",
                    l.w1.rows,
                    l.w1.cols,
                    l.w2.rows,
                    l.w2.cols,
                    d = self.dim,
                    e = self.edge_dim
                )));
            }
        }
        Ok(())
    }
}
