//! The training loop: Adam on freshly streamed manifold batches.

use ndarray::{Array1, Array2};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::{AdamParams, AdamState};
use super::loss::{loss_and_gradients_with, loss_per_sample, ParamGrads, SparsityPenalty, Workspace};
use super::model::{Nonlinearity, SaeError, SaeModel};
use crate::manifolds::{ManifoldError, ManifoldKind, ManifoldSampler};
use crate::seed::{derive_seed, stream};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at step {step}: non-finite loss")]
    Diverged { step: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Sae(#[from] SaeError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    Relu,
    JumpRelu,
}

/// Initialization scheme: encoder rows uniform on the unit sphere scaled by
/// `encoder_scale`, decoder tied to the encoder transpose (at init only),
/// biases zero, JumpReLU thresholds at `jumprelu_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub encoder_scale: f64,
    pub jumprelu_threshold: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            encoder_scale: 0.1,
            jumprelu_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam: AdamParams,
    pub sparsity: SparsityPenalty,
    pub nonlinearity: NonlinearityKind,
    pub seed: u64,
    pub init: InitConfig,
    /// Held-out samples for the final loss estimate.
    pub eval_samples: usize,
    /// Fresh samples used to decide which latents never fire.
    pub dead_check_samples: usize,
    /// A latent activation above this counts as firing.
    pub activation_threshold: f64,
    /// JumpReLU straight-through kernel width, as a fraction of the running
    /// mean |pre-activation|.
    pub ste_bandwidth_factor: f64,
    /// Record a history row every this many steps.
    pub history_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 12_000,
            batch_size: 2048,
            learning_rate: 1e-3,
            adam: AdamParams::default(),
            sparsity: SparsityPenalty::l1_default(),
            nonlinearity: NonlinearityKind::Relu,
            seed: 0,
            init: InitConfig::default(),
            eval_samples: 1 << 15,
            dead_check_samples: 1 << 16,
            activation_threshold: 1e-6,
            ste_bandwidth_factor: 1e-3,
            history_every: 100,
        }
    }
}

impl TrainConfig {
    /// JumpReLU with the tanh penalty defaults.
    pub fn jumprelu_default() -> Self {
        TrainConfig {
            nonlinearity: NonlinearityKind::JumpRelu,
            sparsity: SparsityPenalty::tanh_default(),
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.eval_samples == 0 || self.history_every == 0 {
            return Err(TrainError::Config(
                "eval_samples and history_every must be positive".into(),
            ));
        }
        self.sparsity
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(())
    }
}

/// One recorded point of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub step: usize,
    pub total: f64,
    pub reconstruction: f64,
    pub sparsity: f64,
}

/// Held-out loss estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalLoss {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: SaeModel,
    /// Batch loss every `history_every` steps (plus the final step).
    pub history: Vec<HistoryRow>,
    /// Batch total loss at every step.
    pub step_losses: Vec<f64>,
    pub final_loss: EvalLoss,
    pub dead_mask: Vec<bool>,
    pub dead_latents: usize,
}

impl TrainResult {
    /// Mean batch loss over the `window` steps ending at `step` (1-based
    /// step count; `step = 1000` averages steps 901..=1000).
    pub fn smoothed_loss(&self, step: usize, window: usize) -> Option<f64> {
        if step == 0 || step > self.step_losses.len() || window == 0 {
            return None;
        }
        let lo = step.saturating_sub(window);
        let slice = &self.step_losses[lo..step];
        Some(slice.iter().sum::<f64>() / slice.len() as f64)
    }
}

/// Initialize a model per the config's scheme, deterministically from the
/// config seed.
pub fn init_model(input_dim: usize, n_latents: usize, config: &TrainConfig) -> SaeModel {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stream::INIT));
    let mut w_enc = Array2::zeros((n_latents, input_dim));
    for mut row in w_enc.rows_mut() {
        loop {
            let mut norm_sq = 0.0;
            for v in row.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v = g;
                norm_sq += g * g;
            }
            if norm_sq > 0.0 {
                let scale = config.init.encoder_scale / norm_sq.sqrt();
                for v in row.iter_mut() {
                    *v *= scale;
                }
                break;
            }
        }
    }
    let w_dec = w_enc.t().to_owned();
    let nonlinearity = match config.nonlinearity {
        NonlinearityKind::Relu => Nonlinearity::Relu,
        NonlinearityKind::JumpRelu => Nonlinearity::JumpRelu {
            thresholds: Array1::from_elem(n_latents, config.init.jumprelu_threshold),
            ste_bandwidth: config.ste_bandwidth_factor,
        },
    };
    SaeModel {
        w_enc,
        b_enc: Array1::zeros(n_latents),
        w_dec,
        b_dec: Array1::zeros(input_dim),
        nonlinearity,
    }
}

/// Train a fresh SAE on streamed samples of `kind`.
pub fn train(
    kind: &ManifoldKind,
    n_latents: usize,
    config: &TrainConfig,
) -> Result<TrainResult, TrainError> {
    config.validate()?;
    kind.validate()?;
    let model = init_model(kind.ambient_dim(), n_latents, config);
    train_from(model, kind, config)
}

/// Train a caller-supplied model (used by tests probing init symmetries).
pub fn train_from(
    mut model: SaeModel,
    kind: &ManifoldKind,
    config: &TrainConfig,
) -> Result<TrainResult, TrainError> {
    config.validate()?;
    model.validate()?;
    let mut data = ManifoldSampler::new(kind, derive_seed(config.seed, stream::DATA))?;

    let mut adam = AdamState::new(&model);
    let mut ws = Workspace::new();
    let mut grads = ParamGrads::zeros_like(&model);
    let mut history = Vec::new();
    let mut step_losses = Vec::with_capacity(config.steps);
    // Running mean |z| scale for the JumpReLU straight-through kernel.
    let mut activation_scale = 1.0f64;

    for step in 0..config.steps {
        let batch = data.next_batch(config.batch_size);

        if let Nonlinearity::JumpRelu { ste_bandwidth, .. } = &mut model.nonlinearity {
            *ste_bandwidth = config.ste_bandwidth_factor * activation_scale.max(f64::MIN_POSITIVE);
        }
        let breakdown =
            loss_and_gradients_with(&model, batch.data.view(), &config.sparsity, &mut ws, &mut grads)?;
        if !breakdown.total.is_finite() {
            return Err(TrainError::Diverged { step });
        }
        if matches!(model.nonlinearity, Nonlinearity::JumpRelu { .. }) {
            let mean_abs_z = ws.forward.preactivations.mapv(f64::abs).mean().unwrap_or(1.0);
            activation_scale = 0.99 * activation_scale + 0.01 * mean_abs_z;
        }

        step_losses.push(breakdown.total);
        if step % config.history_every == 0 || step + 1 == config.steps {
            history.push(HistoryRow {
                step,
                total: breakdown.total,
                reconstruction: breakdown.reconstruction,
                sparsity: breakdown.sparsity,
            });
        }

        adam.apply(&mut model, &grads, config.learning_rate, &config.adam);
    }

    let final_loss = evaluate(&model, kind, config)?;
    if !final_loss.mean.is_finite() {
        return Err(TrainError::Diverged { step: config.steps });
    }
    let dead_mask = dead_latent_mask(&model, kind, config)?;
    let dead_latents = dead_mask.iter().filter(|&&d| d).count();

    Ok(TrainResult {
        model,
        history,
        step_losses,
        final_loss,
        dead_mask,
        dead_latents,
    })
}

/// Mean and standard error of the per-sample loss on fresh held-out data.
pub fn evaluate(
    model: &SaeModel,
    kind: &ManifoldKind,
    config: &TrainConfig,
) -> Result<EvalLoss, TrainError> {
    let mut sampler = ManifoldSampler::new(kind, derive_seed(config.seed, stream::EVAL))?;
    let mut ws = Workspace::new();
    let mut values = Vec::with_capacity(config.eval_samples);
    let mut remaining = config.eval_samples;
    while remaining > 0 {
        let take = remaining.min(config.batch_size.max(1));
        let batch = sampler.next_batch(take);
        let per_sample = loss_per_sample(model, batch.data.view(), &config.sparsity, &mut ws)?;
        values.extend(per_sample.iter());
        remaining -= take;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(EvalLoss {
        mean,
        stderr: (var / n).sqrt(),
    })
}

/// True for latents that never activate above the threshold on fresh data.
fn dead_latent_mask(
    model: &SaeModel,
    kind: &ManifoldKind,
    config: &TrainConfig,
) -> Result<Vec<bool>, TrainError> {
    let mut sampler = ManifoldSampler::new(kind, derive_seed(config.seed, stream::DEAD_CHECK))?;
    let mut alive = vec![false; model.n_latents()];
    let mut remaining = config.dead_check_samples;
    while remaining > 0 {
        let take = remaining.min(config.batch_size.max(1));
        let batch = sampler.next_batch(take);
        let fwd = model.forward(batch.data.view())?;
        for f_row in fwd.activations.rows() {
            for (alive, &f) in alive.iter_mut().zip(f_row) {
                if f > config.activation_threshold {
                    *alive = true;
                }
            }
        }
        remaining -= take;
    }
    Ok(alive.iter().map(|&a| !a).collect())
}
