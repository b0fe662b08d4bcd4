//! Training objective and its analytic gradients.
//!
//! Per sample: squared reconstruction error plus a sparsity penalty on the
//! decoder-norm-weighted activations `a_j = f_j * ||w_dec[:, j]||`:
//!
//! - L1:   `lambda * sum_j a_j`
//! - tanh: `weight * sum_j tanh(scale * a_j)`
//!
//! Weighting by decoder norms keeps the penalty invariant to the
//! encoder/decoder rescaling symmetry. Everything is averaged over the
//! batch. Gradients are exact for ReLU models; JumpReLU thresholds receive
//! a rectangle straight-through pseudo-gradient of width `ste_bandwidth`
//! (all other JumpReLU parameters are exact conditioned on the gate
//! pattern).

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::model::{check_batch, run_forward, Forward, Nonlinearity, SaeModel, SaeError};

/// Sparsity penalty configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SparsityPenalty {
    L1 { weight: f64 },
    Tanh { scale: f64, weight: f64 },
}

impl SparsityPenalty {
    /// The L1 default used for ReLU runs.
    pub fn l1_default() -> Self {
        SparsityPenalty::L1 { weight: 0.1 }
    }

    /// The tanh default used for JumpReLU runs.
    pub fn tanh_default() -> Self {
        SparsityPenalty::Tanh {
            scale: 0.1,
            weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SaeError> {
        let ok = match self {
            SparsityPenalty::L1 { weight } => weight.is_finite() && *weight >= 0.0,
            SparsityPenalty::Tanh { scale, weight } => {
                scale.is_finite() && weight.is_finite() && *scale > 0.0 && *weight >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SaeError::InvalidModel(format!(
                "invalid sparsity penalty {self:?}"
            )))
        }
    }
}

/// Batch-mean loss split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub sparsity: f64,
}

/// Gradients of the batch-mean loss with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub w_enc: Array2<f64>,
    pub b_enc: Array1<f64>,
    pub w_dec: Array2<f64>,
    pub b_dec: Array1<f64>,
    pub thresholds: Option<Array1<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(model: &SaeModel) -> Self {
        ParamGrads {
            w_enc: Array2::zeros(model.w_enc.dim()),
            b_enc: Array1::zeros(model.b_enc.len()),
            w_dec: Array2::zeros(model.w_dec.dim()),
            b_dec: Array1::zeros(model.b_dec.len()),
            thresholds: match &model.nonlinearity {
                Nonlinearity::Relu => None,
                Nonlinearity::JumpRelu { thresholds, .. } => {
                    Some(Array1::zeros(thresholds.len()))
                }
            },
        }
    }
}

/// Scratch buffers for loss/gradient evaluation, reusable across steps.
#[derive(Debug, Default)]
pub struct Workspace {
    pub forward: Forward,
    /// `(B, d)`: 2/B * (reconstruction - x).
    scaled_residual: Array2<f64>,
    /// `(B, n)`: dL/df.
    dldf: Array2<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Loss of `model` on `batch` (rows are samples).
pub fn loss(
    model: &SaeModel,
    batch: ArrayView2<f64>,
    penalty: &SparsityPenalty,
) -> Result<LossBreakdown, SaeError> {
    let mut ws = Workspace::new();
    loss_with(model, batch, penalty, &mut ws)
}

pub fn loss_with(
    model: &SaeModel,
    batch: ArrayView2<f64>,
    penalty: &SparsityPenalty,
    ws: &mut Workspace,
) -> Result<LossBreakdown, SaeError> {
    check_batch(model, batch)?;
    penalty.validate()?;
    run_forward(model, batch, &mut ws.forward);
    Ok(breakdown_from_forward(model, batch, penalty, &ws.forward))
}

/// Per-sample total losses (reconstruction + sparsity), for evaluation
/// statistics.
pub fn loss_per_sample(
    model: &SaeModel,
    batch: ArrayView2<f64>,
    penalty: &SparsityPenalty,
    ws: &mut Workspace,
) -> Result<Array1<f64>, SaeError> {
    check_batch(model, batch)?;
    penalty.validate()?;
    run_forward(model, batch, &mut ws.forward);
    let dec_norms = model.decoder_norms();
    let mut out = Array1::zeros(batch.nrows());
    for (i, ((x_row, xhat_row), f_row)) in batch
        .rows()
        .into_iter()
        .zip(ws.forward.reconstruction.rows())
        .zip(ws.forward.activations.rows())
        .enumerate()
    {
        let recon: f64 = x_row
            .iter()
            .zip(xhat_row)
            .map(|(x, xh)| (x - xh) * (x - xh))
            .sum();
        let sp: f64 = match penalty {
            SparsityPenalty::L1 { weight } => {
                weight
                    * f_row
                        .iter()
                        .zip(&dec_norms)
                        .map(|(f, c)| f * c)
                        .sum::<f64>()
            }
            SparsityPenalty::Tanh { scale, weight } => {
                weight
                    * f_row
                        .iter()
                        .zip(&dec_norms)
                        .map(|(f, c)| (scale * f * c).tanh())
                        .sum::<f64>()
            }
        };
        out[i] = recon + sp;
    }
    Ok(out)
}

fn breakdown_from_forward(
    model: &SaeModel,
    batch: ArrayView2<f64>,
    penalty: &SparsityPenalty,
    fwd: &Forward,
) -> LossBreakdown {
    let b = batch.nrows() as f64;
    let mut recon = 0.0;
    for (x_row, xhat_row) in batch.rows().into_iter().zip(fwd.reconstruction.rows()) {
        for (x, xh) in x_row.iter().zip(xhat_row) {
            let r = x - xh;
            recon += r * r;
        }
    }
    recon /= b;

    let dec_norms = model.decoder_norms();
    let mut sparsity = 0.0;
    match penalty {
        SparsityPenalty::L1 { weight } => {
            for f_row in fwd.activations.rows() {
                for (f, c) in f_row.iter().zip(&dec_norms) {
                    sparsity += f * c;
                }
            }
            sparsity *= weight / b;
        }
        SparsityPenalty::Tanh { scale, weight } => {
            for f_row in fwd.activations.rows() {
                for (f, c) in f_row.iter().zip(&dec_norms) {
                    sparsity += (scale * f * c).tanh();
                }
            }
            sparsity *= weight / b;
        }
    }

    LossBreakdown {
        total: recon + sparsity,
        reconstruction: recon,
        sparsity,
    }
}

/// Loss and analytic parameter gradients.
pub fn loss_and_gradients(
    model: &SaeModel,
    batch: ArrayView2<f64>,
    penalty: &SparsityPenalty,
) -> Result<(LossBreakdown, ParamGrads), SaeError> {
    let mut ws = Workspace::new();
    let mut grads = ParamGrads::zeros_like(model);
    let breakdown = loss_and_gradients_with(model, batch, penalty, &mut ws, &mut grads)?;
    Ok((breakdown, grads))
}

pub fn loss_and_gradients_with(
    model: &SaeModel,
    batch: ArrayView2<f64>,
    penalty: &SparsityPenalty,
    ws: &mut Workspace,
    grads: &mut ParamGrads,
) -> Result<LossBreakdown, SaeError> {
    check_batch(model, batch)?;
    penalty.validate()?;
    run_forward(model, batch, &mut ws.forward);
    let breakdown = breakdown_from_forward(model, batch, penalty, &ws.forward);

    let (b, n, d) = (batch.nrows(), model.n_latents(), model.input_dim());
    let inv_b = 1.0 / b as f64;
    let dec_norms = model.decoder_norms();

    if ws.scaled_residual.dim() != (b, d) {
        ws.scaled_residual = Array2::zeros((b, d));
    }
    if ws.dldf.dim() != (b, n) {
        ws.dldf = Array2::zeros((b, n));
    }

    // scaled_residual = 2/B * (xhat - x)
    ndarray::Zip::from(&mut ws.scaled_residual)
        .and(&ws.forward.reconstruction)
        .and(&batch)
        .for_each(|g, &xh, &x| *g = 2.0 * inv_b * (xh - x));

    // Decoder bias: column sums of the scaled residual.
    grads.b_dec.assign(&ws.scaled_residual.sum_axis(Axis(0)));

    // dL/df, reconstruction part: scaled_residual . w_dec
    general_mat_mul(1.0, &ws.scaled_residual, &model.w_dec, 0.0, &mut ws.dldf);

    // Sparsity contributions. dL/da_bj (a = f * c) also accumulates into
    // t_j = sum_b dL/da_bj * f_bj, the gradient of the decoder column norm.
    let mut norm_grad = Array1::<f64>::zeros(n);
    {
        let f = &ws.forward.activations;
        match penalty {
            SparsityPenalty::L1 { weight } => {
                let w = weight * inv_b;
                for (mut dldf_row, f_row) in ws.dldf.rows_mut().into_iter().zip(f.rows()) {
                    for (((dl, &fv), &c), ng) in dldf_row
                        .iter_mut()
                        .zip(f_row)
                        .zip(&dec_norms)
                        .zip(&mut norm_grad)
                    {
                        *dl += w * c;
                        *ng += w * fv;
                    }
                }
            }
            SparsityPenalty::Tanh { scale, weight } => {
                let w = weight * inv_b;
                for (mut dldf_row, f_row) in ws.dldf.rows_mut().into_iter().zip(f.rows()) {
                    for (((dl, &fv), &c), ng) in dldf_row
                        .iter_mut()
                        .zip(f_row)
                        .zip(&dec_norms)
                        .zip(&mut norm_grad)
                    {
                        let t = (scale * fv * c).tanh();
                        let dda = w * scale * (1.0 - t * t);
                        *dl += dda * c;
                        *ng += dda * fv;
                    }
                }
            }
        }
    }

    // Decoder weights: residual part plus the norm term along each column.
    general_mat_mul(
        1.0,
        &ws.scaled_residual.t(),
        &ws.forward.activations,
        0.0,
        &mut grads.w_dec,
    );
    for (j, mut col) in grads.w_dec.axis_iter_mut(Axis(1)).enumerate() {
        let c = dec_norms[j];
        if c > 0.0 && norm_grad[j] != 0.0 {
            let scale = norm_grad[j] / c;
            for (g, &w) in col.iter_mut().zip(model.w_dec.column(j)) {
                *g += scale * w;
            }
        }
    }

    // Threshold pseudo-gradients need dL/df before gating.
    if let Nonlinearity::JumpRelu {
        thresholds,
        ste_bandwidth,
    } = &model.nonlinearity
    {
        let theta_grad = grads
            .thresholds
            .as_mut()
            .expect("zeros_like allocates thresholds for JumpReLU models");
        theta_grad.fill(0.0);
        let eps = *ste_bandwidth;
        if eps > 0.0 {
            for (dldf_row, z_row) in ws.dldf.rows().into_iter().zip(ws.forward.preactivations.rows())
            {
                for (((&dl, &z), &theta), tg) in
                    dldf_row.iter().zip(z_row).zip(thresholds).zip(&mut *theta_grad)
                {
                    if (z - theta).abs() <= 0.5 * eps {
                        *tg -= dl * z / eps;
                    }
                }
            }
        }
    }

    // Gate dL/df into dL/dz in place.
    match &model.nonlinearity {
        Nonlinearity::Relu => {
            ndarray::Zip::from(&mut ws.dldf)
                .and(&ws.forward.preactivations)
                .for_each(|dl, &z| {
                    if z <= 0.0 {
                        *dl = 0.0;
                    }
                });
        }
        Nonlinearity::JumpRelu { thresholds, .. } => {
            for (mut dldf_row, z_row) in ws
                .dldf
                .rows_mut()
                .into_iter()
                .zip(ws.forward.preactivations.rows())
            {
                for ((dl, &z), &theta) in dldf_row.iter_mut().zip(z_row).zip(thresholds) {
                    if z <= theta {
                        *dl = 0.0;
                    }
                }
            }
        }
    }

    // Encoder weights and bias.
    general_mat_mul(1.0, &ws.dldf.t(), &batch, 0.0, &mut grads.w_enc);
    grads.b_enc.assign(&ws.dldf.sum_axis(Axis(0)));

    Ok(breakdown)
}
