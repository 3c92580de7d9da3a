//! Deterministic random streams.
//!
//! Every randomized routine takes a master `seed`. Independent streams are
//! derived by hashing the master seed together with a list of labels (a
//! purpose tag, a generation counter, a chunk or trial index, ...) through
//! SplitMix64 and seeding a ChaCha8 generator with the result. A stream
//! therefore depends only on its labels, never on which thread consumes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `labels` into `seed`.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// A generator for the stream identified by `(seed, labels)`.
pub fn stream(seed: u64, labels: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, labels))
}

// Purpose tags keep streams of different subsystems apart.
pub(crate) const TAG_GRAPH: u64 = 1;
pub(crate) const TAG_CODEWORD: u64 = 2;
pub(crate) const TAG_CHANNEL: u64 = 3;
pub(crate) const TAG_POPULATION: u64 = 4;
pub(crate) const TAG_ENTROPY: u64 = 5;
pub(crate) const TAG_TRIAL: u64 = 6;
