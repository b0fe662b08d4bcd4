//! Does the loss on a composite of orthogonal features decompose into the
//! frequency-weighted sum of per-feature losses?
//!
//! The allocation model rests on exactly this decomposition. The check
//! trains one SAE on the composite stream and one per feature on its native
//! manifold, then compares the joint loss against `sum_i p_i * loss_i`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sae_lab_core::manifolds::{CompositePart, ManifoldError, ManifoldKind};
use sae_lab_core::saecore::{train, EvalLoss, TrainConfig, TrainError};
use sae_lab_core::seed::derive_seed;

use crate::manifest::config_hash;

#[derive(Debug, Error)]
pub enum AdditivityError {
    #[error("need one latent count per part: {parts} parts, {latents} counts")]
    LatentCountMismatch { parts: usize, latents: usize },
    #[error("additivity check needs a composite manifold")]
    NotComposite,
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditivityOptions {
    /// Latents per part; the joint model gets their sum.
    pub latents: Vec<usize>,
    /// Independent seeds per training; best loss is kept.
    pub seeds: usize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartLoss {
    pub frequency: f64,
    pub latents: usize,
    pub loss: EvalLoss,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditivityReport {
    pub config_hash: String,
    pub joint_latents: usize,
    pub joint: EvalLoss,
    pub parts: Vec<PartLoss>,
    /// `sum_i p_i * loss_i`.
    pub weighted_sum: f64,
    /// `|joint - weighted_sum| / weighted_sum`.
    pub relative_gap: f64,
}

/// Train joint and per-part models and report the decomposition gap.
pub fn additivity_check(
    kind: &ManifoldKind,
    options: &AdditivityOptions,
) -> Result<AdditivityReport, AdditivityError> {
    kind.validate()?;
    let parts: &[CompositePart] = match kind {
        ManifoldKind::Composite { parts } => parts,
        _ => return Err(AdditivityError::NotComposite),
    };
    if parts.len() != options.latents.len() {
        return Err(AdditivityError::LatentCountMismatch {
            parts: parts.len(),
            latents: options.latents.len(),
        });
    }
    let seeds = options.seeds.max(1);

    let joint_latents: usize = options.latents.iter().sum();
    let joint = best_of(kind, joint_latents, &options.train, 0, seeds)?;

    let mut parts_out = Vec::with_capacity(parts.len());
    let mut weighted_sum = 0.0;
    for (i, part) in parts.iter().enumerate() {
        let loss = best_of(
            &part.kind,
            options.latents[i],
            &options.train,
            (i + 1) * seeds,
            seeds,
        )?;
        weighted_sum += part.frequency * loss.mean;
        parts_out.push(PartLoss {
            frequency: part.frequency,
            latents: options.latents[i],
            loss,
        });
    }

    let relative_gap = (joint.mean - weighted_sum).abs() / weighted_sum.abs().max(f64::MIN_POSITIVE);
    Ok(AdditivityReport {
        config_hash: config_hash(options),
        joint_latents,
        joint,
        parts: parts_out,
        weighted_sum,
        relative_gap,
    })
}

fn best_of(
    kind: &ManifoldKind,
    n_latents: usize,
    base: &TrainConfig,
    seed_offset: usize,
    seeds: usize,
) -> Result<EvalLoss, AdditivityError> {
    let mut best: Option<EvalLoss> = None;
    for s in 0..seeds {
        let config = TrainConfig {
            seed: derive_seed(base.seed, (seed_offset + s) as u64),
            ..base.clone()
        };
        let result = train(kind, n_latents, &config)?;
        if best.map_or(true, |b| result.final_loss.mean < b.mean) {
            best = Some(result.final_loss);
        }
    }
    Ok(best.expect("seeds >= 1"))
}
