//! Deterministic generator streams.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] seeded
//! through [`seeded`] or [`child_seed`], so a run is a pure function of its
//! master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Counter-based child seed for trial `trial` at grid point `grid`.
///
/// The value depends only on the three inputs, never on execution order.
pub fn child_seed(master: u64, grid: u64, trial: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ grid.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ trial.wrapping_mul(0xA076_1D64_78BD_642F))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn child_seeds_are_stable_and_distinct() {
        assert_eq!(child_seed(7, 1, 2), child_seed(7, 1, 2));
        assert_ne!(child_seed(7, 1, 2), child_seed(7, 2, 1));
        assert_ne!(child_seed(7, 0, 0), child_seed(8, 0, 0));
    }

    #[test]
    fn seeded_streams_repeat() {
        let (mut a, mut b) = (seeded(3), seeded(3));
        for _ in 0..4 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }
}
