//! Seeded randomness.
//!
//! Every stochastic component takes a `SimRng` owned by its caller, so a run
//! is a pure function of (config, seed). Sweeps derive one independent stream
//! per point from the master seed instead of sharing a sequential stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout: counter-based, seedable, fast enough for
/// ~10^8 normal draws per run.
pub type SimRng = ChaCha8Rng;

/// Derives an independent child seed from a master seed and a stream tag
/// (sweep index, scan position, ...). SplitMix64 finalizer: small tag changes
/// decorrelate the child streams.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Convenience constructor for a child RNG.
pub fn child_rng(master: u64, tag: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, tag))
}
