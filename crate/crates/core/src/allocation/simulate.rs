//! Scaling simulation: run the greedy solver over an ascending budget grid.
//!
//! The solver state is reused across budgets, so sweeping to a maximum
//! budget `N` costs the same as solving once at `N`.

use serde::{Deserialize, Serialize};

use super::ensemble::FeatureEnsemble;
use super::greedy::{AllocationError, GreedySolver};

/// One budget row of a scaling simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub budget: u64,
    pub expected_loss: f64,
    pub discovered: usize,
    /// Latent counts of the flagged features, in flag order.
    pub flagged_counts: Vec<u64>,
}

impl ScalingRow {
    /// Fraction of the budget held by flagged feature `flag` (0 at budget 0).
    pub fn flagged_fraction(&self, flag: usize) -> f64 {
        if self.budget == 0 {
            0.0
        } else {
            self.flagged_counts[flag] as f64 / self.budget as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub flagged: Vec<usize>,
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn budgets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.budget as f64).collect()
    }

    pub fn loss_points(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.budget as f64, r.expected_loss))
            .collect()
    }

    pub fn discovery_points(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.budget as f64, r.discovered as f64))
            .collect()
    }
}

/// Solve greedily at every budget in `budgets` (strictly ascending),
/// reporting expected loss, discovery count, and the latent counts of the
/// `flagged` features.
pub fn simulate_scaling(
    ensemble: &FeatureEnsemble,
    budgets: &[u64],
    flagged: &[usize],
) -> Result<ScalingTable, AllocationError> {
    for (i, pair) in budgets.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(AllocationError::BudgetsNotAscending {
                index: i + 1,
                value: pair[1],
                prev: pair[0],
            });
        }
    }
    for &f in flagged {
        if f >= ensemble.len() {
            return Err(AllocationError::FlaggedOutOfRange {
                index: f,
                features: ensemble.len(),
            });
        }
    }

    let mut solver = GreedySolver::new(ensemble);
    let mut rows = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        solver.advance_to(budget)?;
        let allocation = solver.allocation();
        rows.push(ScalingRow {
            budget,
            expected_loss: allocation.expected_loss(),
            discovered: allocation.discovered(),
            flagged_counts: flagged.iter().map(|&f| solver.count(f)).collect(),
        });
    }
    Ok(ScalingTable {
        flagged: flagged.to_vec(),
        rows,
    })
}

/// Integer budgets log-spaced at `per_decade` points per decade over
/// `[lo, hi]`, deduplicated, both endpoints included.
pub fn log_budgets(lo: u64, hi: u64, per_decade: u32) -> Vec<u64> {
    assert!(lo >= 1 && hi >= lo && per_decade >= 1);
    let mut out = Vec::new();
    let start = (lo as f64).log10();
    let mut k = 0u32;
    loop {
        let value = 10f64.powf(start + k as f64 / per_decade as f64).round() as u64;
        if value > hi {
            break;
        }
        if out.last() != Some(&value) {
            out.push(value);
        }
        k += 1;
    }
    if out.last() != Some(&hi) {
        out.push(hi);
    }
    out
}
