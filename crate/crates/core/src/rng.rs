//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream selected by `(seed, stream)`.
//! Record `i` of a shadow run always uses stream `i`, so results do not depend on how work is
//! split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for an independent sub-experiment identified by `tag`.
#[inline]
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

/// Generator for stream `stream` under `seed`.
#[inline]
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Domain tags keep unrelated draws from sharing streams.
pub mod tags {
    pub const CHANNEL_SHADOWS: u64 = 0x6368_616e;
    pub const HISTOGRAM: u64 = 0x6869_7374;
    pub const STATE_SHADOWS: u64 = 0x7374_6174;
    pub const HAAR: u64 = 0x6861_6172;
    pub const GATE_SHADOWS: u64 = 0x6761_7465;
    pub const SPAM: u64 = 0x7370_616d;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng(7, 3).random();
        let b: u64 = stream_rng(7, 3).random();
        let c: u64 = stream_rng(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(1, 2), derive_seed(2, 1));
    }
}
