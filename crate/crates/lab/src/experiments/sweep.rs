//! Loss-vs-latent-count sweeps: train one SAE per (latent count, seed),
//! keep the best loss per count, fit a power law over a window.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sae_lab_core::manifolds::ManifoldKind;
use sae_lab_core::saecore::{train, TrainConfig, TrainError};
use sae_lab_core::seed::derive_seed;
use sae_lab_core::theory::{fit_power_law, PowerLawFit, TheoryError};

use crate::manifest::config_hash;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("latent counts must be ascending and non-empty")]
    BadLatentGrid,
    #[error("seeds_per_point must be >= 1")]
    NoSeeds,
    #[error("every seed diverged at n = {n}")]
    AllSeedsDiverged { n: usize },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Fit(#[from] TheoryError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOptions {
    pub latent_counts: Vec<usize>,
    pub seeds_per_point: usize,
    pub train: TrainConfig,
    /// Fit window over latent counts; `None` skips the fit.
    pub fit_window: Option<(f64, f64)>,
}

impl SweepOptions {
    pub fn new(latent_counts: Vec<usize>, seeds_per_point: usize, train: TrainConfig) -> Self {
        SweepOptions {
            latent_counts,
            seeds_per_point,
            train,
            fit_window: None,
        }
    }
}

/// One trained point of the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_latents: usize,
    pub seed_index: usize,
    /// The derived seed this run actually used.
    pub seed: u64,
    pub final_loss: f64,
    pub final_loss_stderr: f64,
    pub dead_latents: usize,
    pub wall_ms: u64,
    pub diverged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub manifold: ManifoldKind,
    pub config_hash: String,
    pub rows: Vec<SweepPoint>,
    /// Best (lowest) final loss per latent count, with its standard error.
    pub best: Vec<(usize, f64, f64)>,
    pub fit: Option<PowerLawFit>,
}

impl SweepResult {
    pub fn best_points(&self) -> Vec<(f64, f64)> {
        self.best
            .iter()
            .map(|&(n, loss, _)| (n as f64, loss))
            .collect()
    }
}

/// Train the full `(latent count, seed)` grid. Runs execute on the rayon
/// pool; each derives its own seed from the base config seed and its grid
/// index, so results are identical however the pool schedules them.
pub fn run_sweep(kind: &ManifoldKind, options: &SweepOptions) -> Result<SweepResult, SweepError> {
    if options.latent_counts.is_empty()
        || options.latent_counts.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(SweepError::BadLatentGrid);
    }
    if options.seeds_per_point == 0 {
        return Err(SweepError::NoSeeds);
    }
    kind.validate().map_err(TrainError::from)?;

    let runs: Vec<(usize, usize)> = options
        .latent_counts
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..options.seeds_per_point).map(move |s| (i, s)))
        .map(|(i, s)| (options.latent_counts[i], s))
        .collect();

    let results: Vec<Result<SweepPoint, SweepError>> = runs
        .par_iter()
        .map(|&(n, seed_index)| run_point(kind, options, n, seed_index))
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }
    rows.sort_by_key(|p| (p.n_latents, p.seed_index));

    let mut best = Vec::with_capacity(options.latent_counts.len());
    for &n in &options.latent_counts {
        let winner = rows
            .iter()
            .filter(|p| p.n_latents == n && !p.diverged)
            .min_by(|a, b| a.final_loss.total_cmp(&b.final_loss));
        match winner {
            Some(p) => best.push((n, p.final_loss, p.final_loss_stderr)),
            None => return Err(SweepError::AllSeedsDiverged { n }),
        }
    }

    let fit = match options.fit_window {
        Some(window) => {
            let points: Vec<(f64, f64)> = best
                .iter()
                .map(|&(n, loss, _)| (n as f64, loss))
                .collect();
            Some(fit_power_law(&points, window)?)
        }
        None => None,
    };

    Ok(SweepResult {
        manifold: kind.clone(),
        config_hash: config_hash(options),
        rows,
        best,
        fit,
    })
}

fn run_point(
    kind: &ManifoldKind,
    options: &SweepOptions,
    n: usize,
    seed_index: usize,
) -> Result<SweepPoint, SweepError> {
    let grid_index = options
        .latent_counts
        .iter()
        .position(|&m| m == n)
        .expect("n comes from the grid")
        * options.seeds_per_point
        + seed_index;
    let seed = derive_seed(options.train.seed, grid_index as u64);
    let config = TrainConfig {
        seed,
        ..options.train.clone()
    };
    let started = std::time::Instant::now();
    match train(kind, n, &config) {
        Ok(result) => Ok(SweepPoint {
            n_latents: n,
            seed_index,
            seed,
            final_loss: result.final_loss.mean,
            final_loss_stderr: result.final_loss.stderr,
            dead_latents: result.dead_latents,
            wall_ms: started.elapsed().as_millis() as u64,
            diverged: false,
        }),
        Err(TrainError::Diverged { .. }) => Ok(SweepPoint {
            n_latents: n,
            seed_index,
            seed,
            final_loss: f64::NAN,
            final_loss_stderr: f64::NAN,
            dead_latents: 0,
            wall_ms: started.elapsed().as_millis() as u64,
            diverged: true,
        }),
        Err(e) => Err(e.into()),
    }
}
