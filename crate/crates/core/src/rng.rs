//! Counter-based random streams.
//!
//! Every random draw in a simulation comes from a stream addressed by
//! `(seed, index, substream)`, so results do not depend on evaluation order
//! or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sub-stream tags.
pub mod sub {
    pub const GEOMETRY: u64 = 0;
    pub const CHANNEL: u64 = 1;
    pub const BITS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const CSI: u64 = 4;
    pub const PATHLOSS: u64 = 5;
}

/// Independent generator for `(seed, index, substream)`.
pub fn stream(seed: u64, index: u64, substream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    // Sub-streams start 2^64 words apart within the stream.
    rng.set_word_pos((substream as u128) << 64);
    rng
}
