//! Circle-tiling analysis: where on the circle does each latent fire?
//!
//! For an encoder row `w` and bias `b`, the pre-activation along the circle
//! is `|w| cos(angle - phase) + b` — one sign-change interval — so every
//! live latent's active set is a single contiguous arc (possibly the full
//! circle). The report records those arcs, the decoder directions, and the
//! reconstruction traced over a fine angle grid.

use serde::{Deserialize, Serialize};

use ndarray::Array2;
use sae_lab_core::manifolds::ManifoldKind;
use sae_lab_core::saecore::{train, EvalLoss, SaeModel, TrainConfig, TrainError};

use crate::manifest::config_hash;

/// Angle grid resolution: arc endpoints resolved to ~0.09 degrees.
pub const ARC_GRID: usize = 4096;

/// One latent's activation geometry on the circle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentArc {
    pub index: usize,
    /// Never fired above threshold on the evaluation grid.
    pub dead: bool,
    /// Contiguous active spans as (start angle, width), radians; wraparound
    /// spans are reported with their true start on `[0, 2pi)`.
    pub spans: Vec<(f64, f64)>,
    /// Exactly one span (or the full circle).
    pub contiguous: bool,
    pub full_circle: bool,
    /// Unit decoder direction (zero for zero-norm columns).
    pub decoder_direction: [f64; 2],
    pub decoder_norm: f64,
    pub peak_activation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcReport {
    pub n_latents: usize,
    pub config_hash: String,
    pub final_loss: EvalLoss,
    pub latents: Vec<LatentArc>,
    /// Decoded points over the angle grid.
    pub reconstruction: Vec<[f64; 2]>,
    /// Mean arc width (radians) over live latents.
    pub mean_arc_width: f64,
    pub live_latents: usize,
}

/// Train an SAE on the circle and analyze each latent's firing arc.
pub fn circle_tiling(n_latents: usize, config: &TrainConfig) -> Result<ArcReport, TrainError> {
    let result = train(&ManifoldKind::Circle, n_latents, config)?;
    let report = analyze_arcs(&result.model, config.activation_threshold);
    Ok(ArcReport {
        config_hash: config_hash(config),
        final_loss: result.final_loss,
        ..report
    })
}

/// Arc analysis of an existing model (must be 2-dimensional input).
pub fn analyze_arcs(model: &SaeModel, activation_threshold: f64) -> ArcReport {
    assert_eq!(model.input_dim(), 2, "arc analysis needs circle models");
    let n = model.n_latents();
    let step = std::f64::consts::TAU / ARC_GRID as f64;
    let grid = Array2::from_shape_fn((ARC_GRID, 2), |(k, c)| {
        let angle = k as f64 * step;
        if c == 0 {
            angle.cos()
        } else {
            angle.sin()
        }
    });
    let fwd = model
        .forward(grid.view())
        .expect("grid matches model dims");

    let reconstruction: Vec<[f64; 2]> = fwd
        .reconstruction
        .rows()
        .into_iter()
        .map(|r| [r[0], r[1]])
        .collect();

    let dec_norms = model.decoder_norms();
    let mut latents = Vec::with_capacity(n);
    let mut live = 0usize;
    let mut width_sum = 0.0;
    for j in 0..n {
        let active: Vec<bool> = fwd
            .activations
            .column(j)
            .iter()
            .map(|&f| f > activation_threshold)
            .collect();
        let peak = fwd
            .activations
            .column(j)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let spans = active_spans(&active, step);
        let full_circle = active.iter().all(|&a| a);
        let dead = spans.is_empty() && !full_circle;
        let contiguous = full_circle || spans.len() == 1;
        if !dead {
            live += 1;
            width_sum += if full_circle {
                std::f64::consts::TAU
            } else {
                spans.iter().map(|&(_, w)| w).sum::<f64>()
            };
        }
        let norm = dec_norms[j];
        let direction = if norm > 0.0 {
            [model.w_dec[(0, j)] / norm, model.w_dec[(1, j)] / norm]
        } else {
            [0.0, 0.0]
        };
        latents.push(LatentArc {
            index: j,
            dead,
            spans: if full_circle { vec![(0.0, std::f64::consts::TAU)] } else { spans },
            contiguous,
            full_circle,
            decoder_direction: direction,
            decoder_norm: norm,
            peak_activation: peak,
        });
    }

    ArcReport {
        n_latents: n,
        config_hash: String::new(),
        final_loss: EvalLoss {
            mean: f64::NAN,
            stderr: f64::NAN,
        },
        latents,
        reconstruction,
        mean_arc_width: if live > 0 { width_sum / live as f64 } else { 0.0 },
        live_latents: live,
    }
}

/// Contiguous true-runs of a boolean ring, as (start angle, width).
fn active_spans(active: &[bool], step: f64) -> Vec<(f64, f64)> {
    let n = active.len();
    if active.iter().all(|&a| a) || active.iter().all(|&a| !a) {
        return vec![];
    }
    let mut spans = Vec::new();
    for i in 0..n {
        let prev = active[(i + n - 1) % n];
        if active[i] && !prev {
            let mut len = 0;
            while active[(i + len) % n] {
                len += 1;
            }
            spans.push((i as f64 * step, len as f64 * step));
        }
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    spans
}
