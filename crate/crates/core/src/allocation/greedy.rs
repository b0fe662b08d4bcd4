//! Exact integer allocation by largest-marginal-gain-first.
//!
//! Each step gives one latent to the feature whose next latent buys the
//! largest drop in expected loss, `p_i * (L_i(n_i) - L_i(n_i + 1))`. For
//! curves with non-increasing marginal gains this greedy is exactly optimal;
//! power-law curves open with their concave-envelope price (see
//! `LossCurve::gain_schedule`), which is what lets a manifold-like feature
//! compete for its opening latents at all.
//!
//! Features of one curve class enter the queue lazily in frequency order, so
//! the queue holds O(discovered) entries rather than one per feature even
//! for ten-million-feature ensembles.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use super::curve::GainSchedule;
use super::ensemble::FeatureEnsemble;
use super::types::Allocation;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("budgets must be strictly ascending: budgets[{index}] = {value} after {prev}")]
    BudgetsNotAscending { index: usize, value: u64, prev: u64 },
    #[error("flagged feature {index} out of range for {features} features")]
    FlaggedOutOfRange { index: usize, features: usize },
    #[error("latent budget must be positive and finite, got {0}")]
    NonPositiveBudget(f64),
    #[error("continuous solver requires every feature to share one power-law exponent ({found}); use greedy_allocate for mixed ensembles")]
    MixedCurves { found: String },
    #[error("continuous solver does not support a power-law floor (found {0}); use greedy_allocate")]
    UnsupportedFloor(f64),
    #[error("solver can only advance: currently at budget {current}, requested {requested}")]
    BudgetRewind { current: u64, requested: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: highest gain first; ties break toward the lower feature
        // index (the more frequent feature).
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.feature.cmp(&self.feature))
    }
}

/// Incremental greedy solver; reusable across ascending budgets.
pub struct GreedySolver<'a> {
    ensemble: &'a FeatureEnsemble,
    heap: BinaryHeap<Candidate>,
    counts: HashMap<usize, u64>,
    allocated: u64,
    /// Per class: position of the next member not yet staged in the queue.
    cursors: Vec<usize>,
    schedules: Vec<GainSchedule>,
}

impl<'a> GreedySolver<'a> {
    pub fn new(ensemble: &'a FeatureEnsemble) -> Self {
        let schedules: Vec<GainSchedule> = ensemble
            .classes()
            .iter()
            .map(|c| c.curve.gain_schedule())
            .collect();
        let mut solver = GreedySolver {
            ensemble,
            heap: BinaryHeap::new(),
            counts: HashMap::new(),
            allocated: 0,
            cursors: vec![0; ensemble.classes().len()],
            schedules,
        };
        for class in 0..ensemble.classes().len() {
            solver.stage_next(class);
        }
        solver
    }

    /// Stage the next unseen member of `class` into the queue. Within a
    /// class, frequencies (hence opening gains) are non-increasing, so the
    /// next member never needs to be queued before the previous one has
    /// received its first latent.
    fn stage_next(&mut self, class: usize) {
        let pos = self.cursors[class];
        if let Some(feature) = self.ensemble.classes()[class].members.get(pos) {
            let gain = self.ensemble.frequency(feature)
                * self.schedules[class].priced_gain(&self.ensemble.classes()[class].curve, 0);
            self.heap.push(Candidate { gain, feature });
            self.cursors[class] = pos + 1;
        }
    }

    /// Allocate latents until `budget` in total have been handed out.
    pub fn advance_to(&mut self, budget: u64) -> Result<(), AllocationError> {
        if budget < self.allocated {
            return Err(AllocationError::BudgetRewind {
                current: self.allocated,
                requested: budget,
            });
        }
        while self.allocated < budget {
            let Candidate { feature, .. } = self
                .heap
                .pop()
                .expect("queue never empties: allocated features are re-staged");
            let entry = self.counts.entry(feature).or_insert(0);
            let n = *entry;
            *entry = n + 1;
            self.allocated += 1;

            let class = self.ensemble.class_of(feature);
            let gain = self.ensemble.frequency(feature)
                * self.schedules[class].priced_gain(&self.ensemble.classes()[class].curve, n + 1);
            self.heap.push(Candidate { gain, feature });
            if n == 0 {
                self.stage_next(class);
            }
        }
        Ok(())
    }

    pub fn allocated(&self) -> u64 {
        self.allocated
    }

    pub fn count(&self, feature: usize) -> u64 {
        self.counts.get(&feature).copied().unwrap_or(0)
    }

    pub fn discovered(&self) -> usize {
        self.counts.len()
    }

    /// Snapshot the current state as an [`Allocation`].
    pub fn allocation(&self) -> Allocation {
        let counts: Vec<(usize, f64)> = self
            .counts
            .iter()
            .map(|(&i, &n)| (i, n as f64))
            .collect();
        Allocation::from_counts(self.ensemble, counts, true)
    }
}

/// Minimize expected loss over integer allocations summing to `budget`.
pub fn greedy_allocate(
    ensemble: &FeatureEnsemble,
    budget: u64,
) -> Result<Allocation, AllocationError> {
    let mut solver = GreedySolver::new(ensemble);
    solver.advance_to(budget)?;
    Ok(solver.allocation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::curve::LossCurve;

    fn step0() -> LossCurve {
        LossCurve::step(0.0).unwrap()
    }

    #[test]
    fn zero_budget_allocates_nothing() {
        let e = FeatureEnsemble::zipf(10, 0.5, step0()).unwrap();
        let a = greedy_allocate(&e, 0).unwrap();
        assert_eq!(a.total_latents(), 0.0);
        assert_eq!(a.discovered(), 0);
        let zero_loss: f64 = (0..10).map(|i| e.frequency(i)).sum();
        assert!((a.expected_loss() - zero_loss).abs() < 1e-12);
    }

    #[test]
    fn step_features_fill_most_frequent_first() {
        let e = FeatureEnsemble::from_features(vec![
            (0.5, step0()),
            (0.2, step0()),
            (0.15, step0()),
            (0.1, step0()),
            (0.05, step0()),
        ])
        .unwrap();
        let a = greedy_allocate(&e, 3).unwrap();
        assert_eq!(a.discovered(), 3);
        for i in 0..3 {
            assert_eq!(a.count(i), 1.0);
        }
        for i in 3..5 {
            assert_eq!(a.count(i), 0.0);
        }
    }

    #[test]
    fn equal_gains_break_toward_lower_index() {
        let e = FeatureEnsemble::from_features(vec![
            (0.2, step0()),
            (0.2, step0()),
            (0.2, step0()),
            (0.2, step0()),
        ])
        .unwrap();
        let a = greedy_allocate(&e, 2).unwrap();
        assert_eq!(a.count(0), 1.0);
        assert_eq!(a.count(1), 1.0);
        assert_eq!(a.count(2), 0.0);
    }

    #[test]
    fn budget_beyond_useful_gains_is_still_placed() {
        let e = FeatureEnsemble::from_features(vec![(0.6, step0()), (0.4, step0())]).unwrap();
        let a = greedy_allocate(&e, 7).unwrap();
        assert_eq!(a.total_latents(), 7.0);
        // Zero-gain surplus goes to the lowest index deterministically.
        assert_eq!(a.count(0), 6.0);
        assert_eq!(a.count(1), 1.0);
    }

    #[test]
    fn single_feature_takes_everything() {
        let e = FeatureEnsemble::from_features(vec![(1.0, LossCurve::power_law(0.5).unwrap())])
            .unwrap();
        let a = greedy_allocate(&e, 5).unwrap();
        assert_eq!(a.count(0), 5.0);
        assert_eq!(a.discovered(), 1);
        assert!((a.expected_loss() - 5f64.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn rewind_is_rejected() {
        let e = FeatureEnsemble::zipf(10, 0.5, step0()).unwrap();
        let mut s = GreedySolver::new(&e);
        s.advance_to(5).unwrap();
        assert!(matches!(
            s.advance_to(3),
            Err(AllocationError::BudgetRewind { .. })
        ));
    }

    #[test]
    fn power_law_feature_competes_through_envelope() {
        // A frequent manifold-like feature plus many rare discrete features:
        // the manifold's opening latents must win against mid-tail features
        // even though its first latent alone buys nothing.
        let e = FeatureEnsemble::zipf(1000, 0.5, step0())
            .unwrap()
            .with_curve(0, LossCurve::power_law(0.05).unwrap())
            .unwrap();
        let a = greedy_allocate(&e, 500).unwrap();
        assert!(
            a.count(0) > 50.0,
            "manifold feature absorbed only {} latents",
            a.count(0)
        );
        assert!((a.discovered() as u64 as f64) < 500.0);
    }
}
