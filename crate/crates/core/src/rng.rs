//! Seed derivation.
//!
//! Every random quantity is driven by a single 64-bit base seed. Sub-seeds are
//! derived with a counter scheme: the base seed and a path of 64-bit labels
//! (run index, attempt number, stage tag, ...) are folded through the
//! SplitMix64 finalizer, one label at a time. The resulting 64-bit value seeds a
//! ChaCha8 generator. Distinct label paths give statistically independent
//! streams; identical paths reproduce the stream bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stage tags used when deriving sub-seeds.
pub mod tag {
    pub const DEGREES: u64 = 0x01;
    pub const PAIRING: u64 = 0x02;
    pub const EXPLORE: u64 = 0x03;
    pub const STREAM: u64 = 0x04;
    pub const FOREST: u64 = 0x05;
    pub const MARKS: u64 = 0x06;
    pub const CANDIDATES: u64 = 0x07;
    pub const HEADS: u64 = 0x08;
    pub const PATH: u64 = 0x09;
    pub const COX: u64 = 0x0a;
    pub const RUN: u64 = 0x0b;
    pub const RED: u64 = 0x0c;
    pub const DIAMETER: u64 = 0x0d;
    pub const ER: u64 = 0x0e;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `labels` into `base`, producing an independent 64-bit sub-seed.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &l in labels {
        s = splitmix64(s ^ splitmix64(l.wrapping_add(0x6a09_e667_f3bc_c909)));
    }
    s
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(base: u64, labels: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(base, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_deterministic_and_label_sensitive() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
        let a: u64 = derive_rng(3, &[tag::RUN]).random();
        let b: u64 = derive_rng(3, &[tag::RUN]).random();
        assert_eq!(a, b);
    }
}
