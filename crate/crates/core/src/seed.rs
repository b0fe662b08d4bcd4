//! Seed derivation for independent pseudo-random streams.
//!
//! Parallel runs (sweep points, train/data/eval streams) must not share RNG
//! state. Every consumer derives its own seed from a base seed and a stream
//! index through a splitmix64 finalizer, so run `k` of a sweep is identical
//! whether it executes serially or on a worker pool.

/// splitmix64 finalizer step.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for stream `stream` of base seed `base`.
///
/// Defined as `splitmix64(base + (stream + 1) * 0x9E3779B97F4A7C15)`; the
/// `+ 1` keeps stream 0 from collapsing to plain `splitmix64(base)`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Stream indices used by the SAE trainer.
pub mod stream {
    /// Parameter initialization.
    pub const INIT: u64 = 0;
    /// Training batches.
    pub const DATA: u64 = 1;
    /// Held-out evaluation samples.
    pub const EVAL: u64 = 2;
    /// Dead-latent detection samples.
    pub const DEAD_CHECK: u64 = 3;
}
