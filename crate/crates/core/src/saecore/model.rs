//! SAE parameters and the forward pass.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SaeError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dimension mismatch: model takes inputs of dim {expected}, batch rows have dim {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Encoder nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Relu,
    /// Gated identity `z * 1[z > theta]` with per-latent learned thresholds.
    /// `ste_bandwidth` is the current width of the rectangle kernel through
    /// which thresholds receive pseudo-gradients; the trainer keeps it at a
    /// fixed fraction of the running pre-activation scale.
    JumpRelu {
        thresholds: Array1<f64>,
        ste_bandwidth: f64,
    },
}

/// One-hidden-layer autoencoder with an (optionally gated) linear encoder
/// and linear decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeModel {
    /// `(n_latents, input_dim)`
    pub w_enc: Array2<f64>,
    /// `(n_latents,)`
    pub b_enc: Array1<f64>,
    /// `(input_dim, n_latents)` — columns are latent directions.
    pub w_dec: Array2<f64>,
    /// `(input_dim,)`
    pub b_dec: Array1<f64>,
    pub nonlinearity: Nonlinearity,
}

impl SaeModel {
    pub fn n_latents(&self) -> usize {
        self.w_enc.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_enc.ncols()
    }

    pub fn validate(&self) -> Result<(), SaeError> {
        let (n, d) = (self.n_latents(), self.input_dim());
        if self.b_enc.len() != n || self.w_dec.dim() != (d, n) || self.b_dec.len() != d {
            return Err(SaeError::InvalidModel(format!(
                "inconsistent shapes: w_enc {:?}, b_enc {}, w_dec {:?}, b_dec {}",
                self.w_enc.dim(),
                self.b_enc.len(),
                self.w_dec.dim(),
                self.b_dec.len()
            )));
        }
        if let Nonlinearity::JumpRelu { thresholds, .. } = &self.nonlinearity {
            if thresholds.len() != n {
                return Err(SaeError::InvalidModel(format!(
                    "{} thresholds for {} latents",
                    thresholds.len(),
                    n
                )));
            }
        }
        let finite = self.w_enc.iter().all(|v| v.is_finite())
            && self.b_enc.iter().all(|v| v.is_finite())
            && self.w_dec.iter().all(|v| v.is_finite())
            && self.b_dec.iter().all(|v| v.is_finite());
        if !finite {
            return Err(SaeError::InvalidModel("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Euclidean norms of the decoder columns.
    pub fn decoder_norms(&self) -> Array1<f64> {
        self.w_dec
            .axis_iter(Axis(1))
            .map(|col| col.dot(&col).sqrt())
            .collect()
    }

    /// Encode and decode a batch (rows are samples).
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Forward, SaeError> {
        check_batch(self, batch)?;
        let mut fwd = Forward::new();
        run_forward(self, batch, &mut fwd);
        Ok(fwd)
    }

    /// The same model with latents reindexed by `perm` (row/column permutation).
    pub fn permute_latents(&self, perm: &[usize]) -> SaeModel {
        assert_eq!(perm.len(), self.n_latents());
        let w_enc = Array2::from_shape_fn(self.w_enc.dim(), |(j, i)| self.w_enc[(perm[j], i)]);
        let b_enc = Array1::from_shape_fn(self.b_enc.len(), |j| self.b_enc[perm[j]]);
        let w_dec = Array2::from_shape_fn(self.w_dec.dim(), |(i, j)| self.w_dec[(i, perm[j])]);
        let nonlinearity = match &self.nonlinearity {
            Nonlinearity::Relu => Nonlinearity::Relu,
            Nonlinearity::JumpRelu {
                thresholds,
                ste_bandwidth,
            } => Nonlinearity::JumpRelu {
                thresholds: Array1::from_shape_fn(thresholds.len(), |j| thresholds[perm[j]]),
                ste_bandwidth: *ste_bandwidth,
            },
        };
        SaeModel {
            w_enc,
            b_enc,
            w_dec,
            b_dec: self.b_dec.clone(),
            nonlinearity,
        }
    }
}

pub(crate) fn check_batch(model: &SaeModel, batch: ArrayView2<f64>) -> Result<(), SaeError> {
    if batch.nrows() == 0 {
        return Err(SaeError::EmptyBatch);
    }
    if batch.ncols() != model.input_dim() {
        return Err(SaeError::DimMismatch {
            expected: model.input_dim(),
            found: batch.ncols(),
        });
    }
    Ok(())
}

/// Forward-pass tensors, reusable across steps to avoid reallocating
/// batch-sized buffers in the training loop.
#[derive(Debug, Clone, Default)]
pub struct Forward {
    /// `(B, n_latents)` pre-activations.
    pub preactivations: Array2<f64>,
    /// `(B, n_latents)` latent activations.
    pub activations: Array2<f64>,
    /// `(B, input_dim)` reconstructions.
    pub reconstruction: Array2<f64>,
}

impl Forward {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure_shapes(&mut self, b: usize, n: usize, d: usize) {
        if self.preactivations.dim() != (b, n) {
            self.preactivations = Array2::zeros((b, n));
            self.activations = Array2::zeros((b, n));
        }
        if self.reconstruction.dim() != (b, d) {
            self.reconstruction = Array2::zeros((b, d));
        }
    }
}

/// Compute the forward pass into `fwd` (shapes adjusted as needed).
pub(crate) fn run_forward(model: &SaeModel, batch: ArrayView2<f64>, fwd: &mut Forward) {
    use ndarray::linalg::general_mat_mul;

    let (b, n, d) = (batch.nrows(), model.n_latents(), model.input_dim());
    fwd.ensure_shapes(b, n, d);

    general_mat_mul(
        1.0,
        &batch,
        &model.w_enc.t(),
        0.0,
        &mut fwd.preactivations,
    );
    fwd.preactivations += &model.b_enc;

    match &model.nonlinearity {
        Nonlinearity::Relu => {
            ndarray::Zip::from(&mut fwd.activations)
                .and(&fwd.preactivations)
                .for_each(|f, &z| *f = z.max(0.0));
        }
        Nonlinearity::JumpRelu { thresholds, .. } => {
            for (mut f_row, z_row) in fwd
                .activations
                .rows_mut()
                .into_iter()
                .zip(fwd.preactivations.rows())
            {
                for ((f, &z), &theta) in f_row.iter_mut().zip(z_row).zip(thresholds) {
                    *f = if z > theta { z } else { 0.0 };
                }
            }
        }
    }

    general_mat_mul(
        1.0,
        &fwd.activations,
        &model.w_dec.t(),
        0.0,
        &mut fwd.reconstruction,
    );
    fwd.reconstruction += &model.b_dec;
}
