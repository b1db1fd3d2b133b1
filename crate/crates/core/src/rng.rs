//! Seeded random streams.
//!
//! Every run owns one ChaCha8 key derived from its 64-bit seed; separate
//! concerns draw from separate ChaCha streams under that key so that the
//! draws of one never shift the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

/// Stream ids within one tester run.
pub mod stream {
    pub const STEP_ONE: u64 = 0;
    pub const SQUARES: u64 = 1;
    /// The `j`-th subroutine call uses stream `SUBROUTINE_BASE + j`.
    pub const SUBROUTINE_BASE: u64 = 2;
}

pub fn substream(seed: u64, stream: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` under a root seed; depends only on the pair, not
/// on scheduling.
pub fn trial_seed(root: u64, index: u64) -> u64 {
    mix64(root ^ mix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| substream(7, 0).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let x: u64 = substream(7, 0).random();
        let y: u64 = substream(7, 1).random();
        assert_ne!(x, y);
    }

    #[test]
    fn mix64_is_splitmix64() {
        // first two outputs of the reference SplitMix64 seeded with 0
        assert_eq!(mix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(mix64(0x9e37_79b9_7f4a_7c15), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn pinned_first_draw() {
        // Changing the generator silently would break recorded seeds.
        assert_eq!(substream(0, 0).random::<u64>(), 0xb585_f767_a79a_3b6c);
        assert_eq!(trial_seed(1, 2), 0x0e9e_4021_abec_d608);
        assert_ne!(trial_seed(1, 2), trial_seed(1, 3));
    }
}
