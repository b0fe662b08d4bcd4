//! Streaming samplers for the manifold kinds.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ManifoldError, ManifoldKind, ManifoldSpec};

/// A sampled batch. `labels` carries one active-part bitmask per sample for
/// composite manifolds and is `None` otherwise.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub data: Array2<f64>,
    pub labels: Option<Vec<u64>>,
}

/// Deterministic streaming sampler over one manifold.
///
/// Draw order is fixed (per sample, then per part in declaration order), so
/// identical kind + seed reproduces identical batches bit for bit.
pub struct ManifoldSampler {
    kind: ManifoldKind,
    dim: usize,
    rng: ChaCha8Rng,
}

impl ManifoldSampler {
    pub fn new(kind: &ManifoldKind, seed: u64) -> Result<Self, ManifoldError> {
        kind.validate()?;
        Ok(ManifoldSampler {
            kind: kind.clone(),
            dim: kind.ambient_dim(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    /// Sample the next `n` points.
    pub fn next_batch(&mut self, n: usize) -> Dataset {
        let mut data = Array2::zeros((n, self.dim));
        let is_composite = matches!(self.kind, ManifoldKind::Composite { .. });
        let mut labels = is_composite.then(|| Vec::with_capacity(n));
        for mut row in data.rows_mut() {
            let mask = sample_row(
                &self.kind,
                &mut self.rng,
                row.as_slice_mut().expect("rows of a fresh array are contiguous"),
            );
            if let Some(labels) = labels.as_mut() {
                labels.push(mask);
            }
        }
        Dataset { data, labels }
    }
}

/// One-shot sampling of a full spec.
pub fn sample(spec: &ManifoldSpec) -> Result<Dataset, ManifoldError> {
    if spec.samples == 0 {
        return Err(ManifoldError::NoSamples);
    }
    let mut sampler = ManifoldSampler::new(&spec.kind, spec.seed)?;
    Ok(sampler.next_batch(spec.samples))
}

/// Fill `out` with one sample of `kind`; returns the composite activity mask
/// (0 for plain manifolds).
fn sample_row(kind: &ManifoldKind, rng: &mut ChaCha8Rng, out: &mut [f64]) -> u64 {
    match kind {
        ManifoldKind::Circle => {
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            out[0] = angle.cos();
            out[1] = angle.sin();
            0
        }
        ManifoldKind::Hypersphere { dim } => {
            unit_direction(rng, &mut out[..*dim]);
            0
        }
        ManifoldKind::Shell { dim, r_min, r_max } => {
            unit_direction(rng, &mut out[..*dim]);
            let radius = r_min + rng.random::<f64>() * (r_max - r_min);
            for v in &mut out[..*dim] {
                *v *= radius;
            }
            0
        }
        ManifoldKind::Composite { parts } => {
            out.fill(0.0);
            let mut mask = 0u64;
            for (index, part) in parts.iter().enumerate() {
                let gate = rng.random::<f64>();
                if gate >= part.frequency {
                    continue;
                }
                mask |= 1 << index;
                let mut value = vec![0.0; part.kind.ambient_dim()];
                sample_row(&part.kind, rng, &mut value);
                for (col, &coeff) in part.subspace.iter().zip(&value) {
                    for (o, &c) in out.iter_mut().zip(col) {
                        *o += coeff * c;
                    }
                }
            }
            mask
        }
    }
}

/// Isotropic unit vector via normalized standard Gaussians.
fn unit_direction(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        let mut norm_sq = 0.0;
        for v in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *v = g;
            norm_sq += g * g;
        }
        if norm_sq > 0.0 {
            let inv = norm_sq.sqrt().recip();
            for v in out.iter_mut() {
                *v *= inv;
            }
            return;
        }
    }
}
