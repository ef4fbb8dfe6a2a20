//! Seeded, splittable randomness.
//!
//! Every random draw in the crate comes from a [`Rng`] built from an explicit
//! seed. Independent streams are derived with [`split_seed`], a counter-based
//! construction: the master seed and each path element are folded through the
//! SplitMix64 finalizer, so `split_seed(m, &[a, b])` is a pure function of its
//! arguments and any cell or restart can be re-created in isolation.
//!
//! Gaussian variates use the ziggurat sampler from `rand_distr` on top of
//! ChaCha8, which makes every run replayable. Replayability is a testing
//! affordance: a deployment that needs real privacy guarantees must seed from
//! a cryptographically secure entropy source instead of a fixed seed.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::norm2;
use crate::scalar::Scalar;

pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of counters.
pub fn split_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = mix64(master.wrapping_add(GOLDEN_GAMMA));
    for (depth, &p) in path.iter().enumerate() {
        let salt = (depth as u64 + 1).wrapping_mul(GOLDEN_GAMMA);
        h = mix64(h ^ mix64(p.wrapping_add(salt)));
    }
    h
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Shorthand for `rng_from_seed(split_seed(master, path))`.
pub fn rng_at(master: u64, path: &[u64]) -> Rng {
    rng_from_seed(split_seed(master, path))
}

#[inline]
pub fn standard_normal<T: Scalar>(rng: &mut Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

pub fn standard_normal_vec<T: Scalar>(d: usize, rng: &mut Rng) -> Vec<T> {
    (0..d).map(|_| standard_normal(rng)).collect()
}

/// Uniform draw from the unit sphere in `d` dimensions (normalized Gaussian).
pub fn random_unit_vector<T: Scalar>(d: usize, rng: &mut Rng) -> Vec<T> {
    assert!(d >= 1, "sphere dimension must be positive");
    loop {
        let mut g = standard_normal_vec::<T>(d, rng);
        let n = norm2(&g);
        if n > T::zero() && n.is_finite() {
            g.iter_mut().for_each(|x| *x /= n);
            return g;
        }
    }
}
