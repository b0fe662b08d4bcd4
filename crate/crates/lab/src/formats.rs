//! On-disk formats: CSV tables, binary tensor dumps with JSON sidecars.
//!
//! Binary layout is always little-endian 64-bit floats, row-major, with a
//! JSON sidecar (same path, `.json` extension) describing shapes and
//! provenance. CSV numbers are written with Rust's shortest round-trip
//! float formatting, so outputs are bitwise stable for identical inputs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sae_lab_core::allocation::{Allocation, ScalingTable};
use sae_lab_core::manifolds::{Dataset, ManifoldSpec};
use sae_lab_core::saecore::{HistoryRow, Nonlinearity, SaeModel};

use crate::experiments::SweepResult;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("sidecar {0} declares {1} values but the binary holds {2}")]
    LengthMismatch(PathBuf, usize, usize),
    #[error("binary file length {0} is not a multiple of 8")]
    RaggedBinary(u64),
    #[error("unknown nonlinearity kind {0:?} in sidecar")]
    UnknownNonlinearity(String),
}

/// `N,expected_loss,discovered,frac_latents_feature_1` rows of a scaling
/// simulation. The fraction column reports the first flagged feature and is
/// 0 when nothing is flagged.
pub fn scaling_csv(table: &ScalingTable) -> String {
    let mut out = String::from("N,expected_loss,discovered,frac_latents_feature_1\n");
    for row in &table.rows {
        let frac = if table.flagged.is_empty() {
            0.0
        } else {
            row.flagged_fraction(0)
        };
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.budget, row.expected_loss, row.discovered, frac
        );
    }
    out
}

/// `feature,frequency,latents` rows over an allocation's nonzero counts.
pub fn allocation_csv(allocation: &Allocation, frequencies: &[f64]) -> String {
    let mut out = String::from("feature,frequency,latents\n");
    for &(feature, count) in allocation.nonzero() {
        let _ = writeln!(out, "{},{},{}", feature, frequencies[feature], count);
    }
    out
}

/// `n,seed,final_loss,dead_latents,wall_ms` sweep rows. Wall times are
/// diagnostics; every other column is deterministic for a fixed config.
pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("n,seed,final_loss,dead_latents,wall_ms\n");
    for row in &sweep.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.n_latents, row.seed_index, row.final_loss, row.dead_latents, row.wall_ms
        );
    }
    out
}

/// The deterministic half of a sweep: best losses and the fitted slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub manifold: sae_lab_core::manifolds::ManifoldKind,
    pub config_hash: String,
    pub best: Vec<(usize, f64, f64)>,
    pub fit: Option<sae_lab_core::theory::PowerLawFit>,
}

impl From<&SweepResult> for SweepSummary {
    fn from(sweep: &SweepResult) -> Self {
        SweepSummary {
            manifold: sweep.manifold.clone(),
            config_hash: sweep.config_hash.clone(),
            best: sweep.best.clone(),
            fit: sweep.fit,
        }
    }
}

/// `step,total,recon,sparsity` training-history rows.
pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("step,total,recon,sparsity\n");
    for row in history {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.step, row.total, row.reconstruction, row.sparsity
        );
    }
    out
}

fn write_f64s(path: &Path, chunks: &[&[f64]]) -> io::Result<()> {
    let mut bytes = Vec::with_capacity(chunks.iter().map(|c| c.len() * 8).sum());
    for chunk in chunks {
        for v in *chunk {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)
}

fn read_f64s(path: &Path) -> Result<Vec<f64>, FormatError> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(FormatError::RaggedBinary(bytes.len() as u64));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetSidecar {
    shape: (usize, usize),
    spec: ManifoldSpec,
    has_labels: bool,
}

/// Dump a dataset as `path` (binary) plus `path.with_extension("json")`.
/// Composite labels, when present, are appended as one f64 bitmask per row.
pub fn save_dataset(path: &Path, dataset: &Dataset, spec: &ManifoldSpec) -> Result<(), FormatError> {
    let sidecar = DatasetSidecar {
        shape: dataset.data.dim(),
        spec: spec.clone(),
        has_labels: dataset.labels.is_some(),
    };
    let labels: Vec<f64> = dataset
        .labels
        .as_ref()
        .map(|l| l.iter().map(|&m| m as f64).collect())
        .unwrap_or_default();
    let data = dataset
        .data
        .as_slice()
        .expect("sampled data is contiguous");
    write_f64s(path, &[data, &labels])?;
    fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<(Dataset, ManifoldSpec), FormatError> {
    let sidecar: DatasetSidecar =
        serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
    let values = read_f64s(path)?;
    let (rows, cols) = sidecar.shape;
    let expected = rows * cols + if sidecar.has_labels { rows } else { 0 };
    if values.len() != expected {
        return Err(FormatError::LengthMismatch(
            path.to_path_buf(),
            expected,
            values.len(),
        ));
    }
    let data = Array2::from_shape_vec((rows, cols), values[..rows * cols].to_vec())
        .expect("shape matches length");
    let labels = sidecar
        .has_labels
        .then(|| values[rows * cols..].iter().map(|&v| v as u64).collect());
    Ok((Dataset { data, labels }, sidecar.spec))
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointSidecar {
    input_dim: usize,
    n_latents: usize,
    nonlinearity: String,
    ste_bandwidth: Option<f64>,
    config_hash: String,
    /// Tensor order in the binary: w_enc, b_enc, w_dec, b_dec[, thresholds].
    layout: Vec<String>,
}

/// Save a model checkpoint: flat little-endian f64 tensors plus sidecar.
pub fn save_model(path: &Path, model: &SaeModel, config_hash: &str) -> Result<(), FormatError> {
    let mut layout = vec![
        "w_enc".to_string(),
        "b_enc".to_string(),
        "w_dec".to_string(),
        "b_dec".to_string(),
    ];
    let (nonlinearity, ste_bandwidth, thresholds) = match &model.nonlinearity {
        Nonlinearity::Relu => ("relu".to_string(), None, None),
        Nonlinearity::JumpRelu {
            thresholds,
            ste_bandwidth,
        } => {
            layout.push("thresholds".to_string());
            (
                "jumprelu".to_string(),
                Some(*ste_bandwidth),
                Some(thresholds.clone()),
            )
        }
    };
    let sidecar = CheckpointSidecar {
        input_dim: model.input_dim(),
        n_latents: model.n_latents(),
        nonlinearity,
        ste_bandwidth,
        config_hash: config_hash.to_string(),
        layout,
    };
    let w_enc = model.w_enc.as_slice().expect("row-major");
    let w_dec_owned;
    let w_dec = match model.w_dec.as_slice() {
        Some(s) => s,
        None => {
            w_dec_owned = model.w_dec.as_standard_layout().to_owned();
            w_dec_owned.as_slice().expect("standard layout")
        }
    };
    let mut chunks: Vec<&[f64]> = vec![
        w_enc,
        model.b_enc.as_slice().expect("contiguous"),
        w_dec,
        model.b_dec.as_slice().expect("contiguous"),
    ];
    if let Some(t) = &thresholds {
        chunks.push(t.as_slice().expect("contiguous"));
    }
    write_f64s(path, &chunks)?;
    fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SaeModel, FormatError> {
    let sidecar: CheckpointSidecar =
        serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
    let values = read_f64s(path)?;
    let (n, d) = (sidecar.n_latents, sidecar.input_dim);
    let with_theta = match sidecar.nonlinearity.as_str() {
        "relu" => false,
        "jumprelu" => true,
        other => return Err(FormatError::UnknownNonlinearity(other.to_string())),
    };
    let expected = n * d + n + d * n + d + if with_theta { n } else { 0 };
    if values.len() != expected {
        return Err(FormatError::LengthMismatch(
            path.to_path_buf(),
            expected,
            values.len(),
        ));
    }
    let mut offset = 0usize;
    let mut take = |len: usize| {
        let slice = values[offset..offset + len].to_vec();
        offset += len;
        slice
    };
    let w_enc = Array2::from_shape_vec((n, d), take(n * d)).expect("shape");
    let b_enc = Array1::from_vec(take(n));
    let w_dec = Array2::from_shape_vec((d, n), take(d * n)).expect("shape");
    let b_dec = Array1::from_vec(take(d));
    let nonlinearity = if with_theta {
        Nonlinearity::JumpRelu {
            thresholds: Array1::from_vec(take(n)),
            ste_bandwidth: sidecar.ste_bandwidth.unwrap_or(0.0),
        }
    } else {
        Nonlinearity::Relu
    };
    Ok(SaeModel {
        w_enc,
        b_enc,
        w_dec,
        b_dec,
        nonlinearity,
    })
}
