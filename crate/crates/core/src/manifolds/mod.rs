//! Seeded generators of synthetic feature-manifold data.
//!
//! Data is modeled as a sum of sparsely occurring features, each living on
//! its own subspace: a sample activates feature `i` with probability `p_i`
//! and, when active, adds `S_i f_i` where the columns of `S_i` are an
//! orthonormal basis of the feature's subspace and `f_i` is drawn from the
//! feature's manifold (circle, hypersphere, or radial shell).
//!
//! Sampling is streaming and bitwise reproducible given a seed; see
//! [`ManifoldSampler`].

mod sampler;

pub use sampler::{sample, ManifoldSampler};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("hypersphere/shell dimension must be >= 1, got {0}")]
    BadDimension(usize),
    #[error("shell requires 0 <= r_min < r_max and finite bounds, got [{r_min}, {r_max}]")]
    BadShell { r_min: f64, r_max: f64 },
    #[error("composite needs at least one part")]
    EmptyComposite,
    #[error("composite supports at most 64 parts, got {0}")]
    TooManyParts(usize),
    #[error("composite part {part} frequency must be in (0, 1], got {value}")]
    BadFrequency { part: usize, value: f64 },
    #[error("composite part {part}: expected {expected} subspace columns of shared ambient length, found {cols} columns (first of length {len})")]
    BadSubspaceShape {
        part: usize,
        expected: usize,
        cols: usize,
        len: usize,
    },
    #[error("composite part {part} column {col} is not unit length: norm {norm}")]
    NotUnitColumn { part: usize, col: usize, norm: f64 },
    #[error("composite subspace columns are not orthogonal: part {part_a} col {col_a} vs part {part_b} col {col_b}, dot {dot:e}")]
    NotOrthogonal {
        part_a: usize,
        col_a: usize,
        part_b: usize,
        col_b: usize,
        dot: f64,
    },
    #[error("sample count must be positive")]
    NoSamples,
}

/// The manifold a feature's values live on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldKind {
    /// Unit circle in the plane, angle uniform.
    Circle,
    /// Unit sphere surface in `dim` ambient dimensions, isotropic.
    Hypersphere { dim: usize },
    /// Uniform direction with radius uniform on `[r_min, r_max]`.
    Shell { dim: usize, r_min: f64, r_max: f64 },
    /// Sparse sum of features on mutually orthogonal subspaces.
    Composite { parts: Vec<CompositePart> },
}

/// One feature of a composite: its manifold, firing probability, and the
/// orthonormal columns embedding it into the ambient space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePart {
    #[serde(flatten)]
    pub kind: ManifoldKind,
    pub frequency: f64,
    /// Columns of the embedding, each of ambient length.
    pub subspace: Vec<Vec<f64>>,
}

/// A dataset request: what to sample, how much, and with which seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    #[serde(flatten)]
    pub kind: ManifoldKind,
    pub samples: usize,
    pub seed: u64,
}

impl ManifoldKind {
    /// Shell with the conventional radial support `[0.5, 2]`.
    pub fn shell_default(dim: usize) -> Self {
        ManifoldKind::Shell {
            dim,
            r_min: 0.5,
            r_max: 2.0,
        }
    }

    /// Dimension of the space the samples live in.
    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldKind::Circle => 2,
            ManifoldKind::Hypersphere { dim } | ManifoldKind::Shell { dim, .. } => *dim,
            ManifoldKind::Composite { parts } => parts
                .first()
                .and_then(|p| p.subspace.first())
                .map(|col| col.len())
                .unwrap_or(0),
        }
    }

    /// Check every construction invariant, recursively for composites.
    pub fn validate(&self) -> Result<(), ManifoldError> {
        match self {
            ManifoldKind::Circle => Ok(()),
            ManifoldKind::Hypersphere { dim } => {
                if *dim == 0 {
                    Err(ManifoldError::BadDimension(*dim))
                } else {
                    Ok(())
                }
            }
            ManifoldKind::Shell { dim, r_min, r_max } => {
                if *dim == 0 {
                    return Err(ManifoldError::BadDimension(*dim));
                }
                if !(r_min.is_finite() && r_max.is_finite() && *r_min >= 0.0 && r_min < r_max) {
                    return Err(ManifoldError::BadShell {
                        r_min: *r_min,
                        r_max: *r_max,
                    });
                }
                Ok(())
            }
            ManifoldKind::Composite { parts } => validate_composite(parts),
        }
    }
}

const ORTHOGONALITY_TOL: f64 = 1e-9;

fn validate_composite(parts: &[CompositePart]) -> Result<(), ManifoldError> {
    if parts.is_empty() {
        return Err(ManifoldError::EmptyComposite);
    }
    if parts.len() > 64 {
        return Err(ManifoldError::TooManyParts(parts.len()));
    }
    let ambient = parts[0]
        .subspace
        .first()
        .map(|c| c.len())
        .unwrap_or(0);
    for (index, part) in parts.iter().enumerate() {
        part.kind.validate()?;
        if !(part.frequency > 0.0 && part.frequency <= 1.0) {
            return Err(ManifoldError::BadFrequency {
                part: index,
                value: part.frequency,
            });
        }
        let expected = part.kind.ambient_dim();
        let ok = part.subspace.len() == expected
            && !part.subspace.is_empty()
            && part.subspace.iter().all(|c| c.len() == ambient);
        if !ok {
            return Err(ManifoldError::BadSubspaceShape {
                part: index,
                expected,
                cols: part.subspace.len(),
                len: part.subspace.first().map(|c| c.len()).unwrap_or(0),
            });
        }
        for (ci, col) in part.subspace.iter().enumerate() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > ORTHOGONALITY_TOL {
                return Err(ManifoldError::NotUnitColumn {
                    part: index,
                    col: ci,
                    norm,
                });
            }
        }
    }
    // Pairwise orthogonality, within and across parts.
    let all_cols: Vec<(usize, usize, &Vec<f64>)> = parts
        .iter()
        .enumerate()
        .flat_map(|(pi, p)| p.subspace.iter().enumerate().map(move |(ci, c)| (pi, ci, c)))
        .collect();
    for (a, &(pa, ca, col_a)) in all_cols.iter().enumerate() {
        for &(pb, cb, col_b) in &all_cols[a + 1..] {
            let dot: f64 = col_a.iter().zip(col_b).map(|(x, y)| x * y).sum();
            if dot.abs() > ORTHOGONALITY_TOL {
                return Err(ManifoldError::NotOrthogonal {
                    part_a: pa,
                    col_a: ca,
                    part_b: pb,
                    col_b: cb,
                    dot,
                });
            }
        }
    }
    Ok(())
}

/// Embed two manifolds on orthogonal axis-aligned planes of `R^(da+db)`.
pub fn orthogonal_pair(
    first: ManifoldKind,
    p_first: f64,
    second: ManifoldKind,
    p_second: f64,
) -> Result<ManifoldKind, ManifoldError> {
    let da = first.ambient_dim();
    let db = second.ambient_dim();
    let ambient = da + db;
    let axis = |i: usize| {
        let mut col = vec![0.0; ambient];
        col[i] = 1.0;
        col
    };
    let kind = ManifoldKind::Composite {
        parts: vec![
            CompositePart {
                kind: first,
                frequency: p_first,
                subspace: (0..da).map(axis).collect(),
            },
            CompositePart {
                kind: second,
                frequency: p_second,
                subspace: (da..ambient).map(axis).collect(),
            },
        ],
    };
    kind.validate()?;
    Ok(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_specs() {
        assert!(ManifoldKind::Hypersphere { dim: 0 }.validate().is_err());
        assert!(ManifoldKind::Shell {
            dim: 3,
            r_min: 2.0,
            r_max: 0.5
        }
        .validate()
        .is_err());
        assert!(ManifoldKind::Composite { parts: vec![] }.validate().is_err());
    }

    #[test]
    fn composite_rejects_non_orthogonal_blocks() {
        let col = |v: [f64; 4]| v.to_vec();
        let parts = vec![
            CompositePart {
                kind: ManifoldKind::Circle,
                frequency: 0.5,
                subspace: vec![col([1.0, 0.0, 0.0, 0.0]), col([0.0, 1.0, 0.0, 0.0])],
            },
            CompositePart {
                kind: ManifoldKind::Circle,
                frequency: 0.5,
                // First column overlaps part 0's second column.
                subspace: vec![col([0.0, 1.0, 0.0, 0.0]), col([0.0, 0.0, 0.0, 1.0])],
            },
        ];
        assert!(matches!(
            ManifoldKind::Composite { parts }.validate(),
            Err(ManifoldError::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn orthogonal_pair_builds_valid_composites() {
        let kind = orthogonal_pair(
            ManifoldKind::Circle,
            0.2,
            ManifoldKind::Circle,
            0.2,
        )
        .unwrap();
        assert_eq!(kind.ambient_dim(), 4);
        kind.validate().unwrap();
    }

    #[test]
    fn spec_serde_round_trip() {
        let spec = ManifoldSpec {
            kind: ManifoldKind::shell_default(8),
            samples: 100,
            seed: 7,
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: ManifoldSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}
