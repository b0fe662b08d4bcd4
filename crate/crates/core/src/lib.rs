//! Core numerics for studying how sparse autoencoders spend their latent
//! budget across power-law-distributed features.
//!
//! The crate has four parts:
//!
//! - [`allocation`] — the latent-allocation problem: minimize the
//!   frequency-weighted sum of per-feature loss curves subject to a total
//!   latent budget, solved exactly (integer greedy) and by continuous
//!   relaxation, plus an incremental scaling simulation.
//! - [`theory`] — closed-form regime predictions (which exponent wins) and
//!   log-log power-law fitting used to check measured curves against them.
//! - [`manifolds`] — seeded samplers for synthetic feature manifolds
//!   (circle, hyperspheres, radial shells, sparse orthogonal composites).
//! - [`saecore`] — a from-scratch SAE: ReLU or JumpReLU encoder, L1 or tanh
//!   sparsity with the decoder-norm weighting, analytic gradients, Adam.
//!
//! Everything is deterministic given a seed; see [`seed`] for how parallel
//! runs derive independent streams.

pub mod allocation;
pub mod manifolds;
pub mod saecore;
pub mod seed;
pub mod theory;
pub mod util;
