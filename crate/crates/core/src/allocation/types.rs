//! The result of solving the allocation problem.

use serde::{Deserialize, Serialize};

use super::ensemble::FeatureEnsemble;
use crate::util::KahanSum;

/// An assignment of latents to features plus its derived totals.
///
/// Counts are stored sparsely as sorted `(feature, count)` pairs over the
/// features holding at least one latent. Integer-solver allocations carry
/// exact integer values in the `f64` counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    counts: Vec<(usize, f64)>,
    total_latents: f64,
    expected_loss: f64,
    discovered: usize,
    integer: bool,
}

impl Allocation {
    pub(crate) fn from_counts(
        ensemble: &FeatureEnsemble,
        mut counts: Vec<(usize, f64)>,
        integer: bool,
    ) -> Self {
        counts.sort_unstable_by_key(|&(i, _)| i);
        counts.retain(|&(_, n)| n > 0.0);
        let mut total = KahanSum::new();
        for &(_, n) in &counts {
            total.add(n);
        }
        let expected_loss = ensemble.expected_loss(&counts);
        let discovered = counts.len();
        Self {
            counts,
            total_latents: total.value(),
            expected_loss,
            discovered,
            integer,
        }
    }

    /// Latents held by `feature` (0 when undiscovered).
    pub fn count(&self, feature: usize) -> f64 {
        match self.counts.binary_search_by_key(&feature, |&(i, _)| i) {
            Ok(pos) => self.counts[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Sorted `(feature, count)` pairs over features with nonzero count.
    pub fn nonzero(&self) -> &[(usize, f64)] {
        &self.counts
    }

    pub fn total_latents(&self) -> f64 {
        self.total_latents
    }

    pub fn expected_loss(&self) -> f64 {
        self.expected_loss
    }

    /// Number of features holding at least one latent.
    pub fn discovered(&self) -> usize {
        self.discovered
    }

    /// True when produced by the integer solver.
    pub fn is_integer(&self) -> bool {
        self.integer
    }
}
