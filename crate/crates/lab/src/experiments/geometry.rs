//! Nearest-neighbor cosine structure of decoder matrices.
//!
//! Latents tiling a low-dimensional manifold sit at small angles to their
//! neighbors, so the distribution of nearest-neighbor cosine similarities
//! separates tiling solutions from approximately orthogonal random
//! directions.

use ndarray::{Array2, ArrayView2, Axis};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sae_lab_core::seed::derive_seed;
use sae_lab_core::util::median;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("nearest-neighbor analysis needs at least 2 live latents, found {0}")]
    TooFewLive(usize),
    #[error("decoder matrix must have at least 1 row and 2 columns, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },
}

pub const HIGH_SIMILARITY: f64 = 0.97;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn build(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0usize; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Histogram { lo, hi, counts }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryReport {
    /// Per latent: highest absolute cosine similarity to any other live
    /// latent (`None` for dead latents, which are excluded from the
    /// search). Absolute value makes the report invariant under column
    /// sign flips; an antiparallel duplicate counts as a duplicate.
    pub nn_similarity: Vec<Option<f64>>,
    pub dead: Vec<bool>,
    pub live_latents: usize,
    pub median_nn: f64,
    /// Live latents with a neighbor above 0.97.
    pub high_similarity_count: usize,
    pub histogram: Histogram,
}

/// Nearest-neighbor cosine similarities of decoder columns.
///
/// Zero-norm columns are flagged dead and excluded; `known_dead` marks
/// additional latents (e.g. ones that never fire) to exclude.
pub fn decoder_geometry(
    w_dec: ArrayView2<f64>,
    known_dead: Option<&[bool]>,
    bins: usize,
) -> Result<GeometryReport, GeometryError> {
    let (rows, cols) = w_dec.dim();
    if rows == 0 || cols < 2 {
        return Err(GeometryError::BadShape { rows, cols });
    }
    let mut dead = vec![false; cols];
    if let Some(mask) = known_dead {
        for (d, &m) in dead.iter_mut().zip(mask) {
            *d = m;
        }
    }
    let mut normalized = Array2::zeros((rows, cols));
    for (j, col) in w_dec.axis_iter(Axis(1)).enumerate() {
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            dead[j] = true;
            continue;
        }
        let mut out = normalized.column_mut(j);
        for (o, &v) in out.iter_mut().zip(col) {
            *o = v / norm;
        }
    }
    let live_indices: Vec<usize> = (0..cols).filter(|&j| !dead[j]).collect();
    if live_indices.len() < 2 {
        return Err(GeometryError::TooFewLive(live_indices.len()));
    }

    // Gram matrix over live columns, in column blocks to bound memory.
    let live = live_indices.len();
    let live_cols = {
        let mut m = Array2::zeros((rows, live));
        for (k, &j) in live_indices.iter().enumerate() {
            m.column_mut(k).assign(&normalized.column(j));
        }
        m
    };
    let mut best = vec![f64::NEG_INFINITY; live];
    let block = 512usize;
    let mut start = 0;
    while start < live {
        let end = (start + block).min(live);
        let gram = live_cols.slice(ndarray::s![.., start..end]).t().dot(&live_cols);
        for (bi, grow) in gram.rows().into_iter().enumerate() {
            let i = start + bi;
            for (k, &g) in grow.iter().enumerate() {
                let g = g.abs();
                if k != i && g > best[i] {
                    best[i] = g.clamp(0.0, 1.0);
                }
            }
        }
        start = end;
    }

    let mut nn_similarity = vec![None; cols];
    for (k, &j) in live_indices.iter().enumerate() {
        nn_similarity[j] = Some(best[k]);
    }
    let median_nn = median(&best).expect("at least two live latents");
    let high_similarity_count = best.iter().filter(|&&s| s > HIGH_SIMILARITY).count();
    let histogram = Histogram::build(&best, -1.0, 1.0, bins.max(1));

    Ok(GeometryReport {
        nn_similarity,
        dead,
        live_latents: live,
        median_nn,
        high_similarity_count,
        histogram,
    })
}

/// Matrix of `n` uniformly random unit columns in `R^dim`.
pub fn random_unit_columns(dim: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Array2::zeros((dim, n));
    for mut col in m.axis_iter_mut(Axis(1)) {
        loop {
            let mut norm_sq = 0.0;
            for v in col.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v = g;
                norm_sq += g * g;
            }
            if norm_sq > 0.0 {
                let inv = norm_sq.sqrt().recip();
                for v in col.iter_mut() {
                    *v *= inv;
                }
                break;
            }
        }
    }
    m
}

/// Monte-Carlo baseline: median of per-resample median NN similarities for
/// `n` random unit columns in `R^dim`.
pub fn random_median_baseline(dim: usize, n: usize, resamples: usize, seed: u64) -> f64 {
    let medians: Vec<f64> = (0..resamples)
        .map(|r| {
            let m = random_unit_columns(dim, n, derive_seed(seed, r as u64));
            decoder_geometry(m.view(), None, 40)
                .expect("random columns are live")
                .median_nn
        })
        .collect();
    median(&medians).expect("resamples >= 1")
}
