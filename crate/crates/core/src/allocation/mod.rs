//! The latent-allocation problem.
//!
//! Given features with frequencies `p_i` and per-feature loss curves
//! `L_i(n)`, choose integer (or real) latent counts `n_i` minimizing
//! `sum_i p_i L_i(n_i)` subject to `sum_i n_i = N`.

mod continuous;
mod curve;
mod ensemble;
mod greedy;
mod simulate;
mod types;

pub use continuous::continuous_allocate;
pub use curve::{CurveError, LossCurve};
pub use ensemble::{EnsembleError, FeatureEnsemble, Normalization};
pub use greedy::{greedy_allocate, AllocationError, GreedySolver};
pub use simulate::{log_budgets, simulate_scaling, ScalingRow, ScalingTable};
pub use types::Allocation;
