//! Seeded randomness.
//!
//! Every random decision in the crate draws from xoshiro256++ seeded through
//! SplitMix64 (`Xoshiro256PlusPlus::seed_from_u64`). Shuffles use the
//! Fisher–Yates scheme below with a multiply-shift bounded draw, so a
//! shuffle is fully determined by the raw 64-bit output stream.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type CadRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> CadRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Uniform integer in `0..bound` as `(next_u64 * bound) >> 64`.
pub fn bounded(rng: &mut impl RngCore, bound: usize) -> usize {
    debug_assert!(bound > 0);
    ((rng.next_u64() as u128 * bound as u128) >> 64) as usize
}

/// In-place Fisher–Yates: for `i` from the end down to 1, swap `i` with
/// `bounded(i + 1)`.
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = bounded(rng, i + 1);
        items.swap(i, j);
    }
}

/// Short fingerprint of a generator's position in its stream.
pub fn digest(rng: &CadRng) -> String {
    let mut probe = rng.clone();
    format!("{:016x}", probe.next_u64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffle_is_a_permutation_and_reproducible() {
        let mut a: Vec<usize> = (0..50).collect();
        let mut b = a.clone();
        shuffle(&mut seeded(11), &mut a);
        shuffle(&mut seeded(11), &mut b);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(a, sorted);
    }

    #[test]
    fn bounded_stays_in_range() {
        let mut r = seeded(3);
        for bound in 1..40 {
            for _ in 0..50 {
                assert!(bounded(&mut r, bound) < bound);
            }
        }
    }
}
