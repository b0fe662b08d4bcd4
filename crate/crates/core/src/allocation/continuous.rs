//! Continuous (Lagrange-multiplier) relaxation of the allocation problem.
//!
//! When every feature shares one power-law curve `n^-beta`, the stationarity
//! condition of `sum_i p_i n_i^-beta` under `sum_i n_i = N` gives
//! `n_i = kappa * p_i^(1/(1+beta))`. Features whose unconstrained value
//! falls below one latent are cut to zero (they are effectively
//! undiscovered), and `kappa` is re-solved over the survivors until the cut
//! is stable — dropping the least frequent active feature one at a time, at
//! most once per feature.

use super::ensemble::FeatureEnsemble;
use super::greedy::AllocationError;
use super::types::Allocation;
use crate::allocation::LossCurve;
use crate::util::KahanSum;

/// Solve the continuous relaxation for a uniform power-law ensemble.
pub fn continuous_allocate(
    ensemble: &FeatureEnsemble,
    budget: f64,
) -> Result<Allocation, AllocationError> {
    if !budget.is_finite() || budget <= 0.0 {
        return Err(AllocationError::NonPositiveBudget(budget));
    }
    let beta = uniform_power_law_exponent(ensemble)?;
    let share_exponent = 1.0 / (1.0 + beta);

    let weights: Vec<f64> = ensemble
        .frequencies()
        .iter()
        .map(|p| p.powf(share_exponent))
        .collect();
    let mut prefix = Vec::with_capacity(weights.len());
    let mut acc = KahanSum::new();
    for &w in &weights {
        acc.add(w);
        prefix.push(acc.value());
    }

    // Cut features below one latent, least frequent first, re-solving kappa
    // after each cut. Weights are non-increasing, so the active set is
    // always a prefix and the loop stops at the first stable cutoff.
    let mut active = weights.len();
    let kappa = loop {
        let kappa = budget / prefix[active - 1];
        if active == 1 || kappa * weights[active - 1] >= 1.0 {
            break kappa;
        }
        active -= 1;
    };

    let counts: Vec<(usize, f64)> = (0..active).map(|i| (i, kappa * weights[i])).collect();
    Ok(Allocation::from_counts(ensemble, counts, false))
}

fn uniform_power_law_exponent(ensemble: &FeatureEnsemble) -> Result<f64, AllocationError> {
    let mut exponent: Option<f64> = None;
    for class in ensemble.classes() {
        match &class.curve {
            LossCurve::PowerLaw { exponent: b, floor } => {
                if *floor != 0.0 {
                    return Err(AllocationError::UnsupportedFloor(*floor));
                }
                match exponent {
                    None => exponent = Some(*b),
                    Some(prev) if prev == *b => {}
                    Some(prev) => {
                        return Err(AllocationError::MixedCurves {
                            found: format!("power-law exponents {prev} and {b}"),
                        })
                    }
                }
            }
            other => {
                return Err(AllocationError::MixedCurves {
                    found: format!("non-power-law curve {other:?}"),
                })
            }
        }
    }
    Ok(exponent.expect("ensembles are non-empty"))
}
