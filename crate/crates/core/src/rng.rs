//! Seeded generators and child-seed derivation.
//!
//! Every parallel task gets its own generator derived from `(seed, stream)`
//! so results do not depend on scheduling or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer over `seed` and `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn child(seed: u64, stream: u64) -> SeededRng {
    seeded(derive_seed(seed, stream))
}

/// `m` indices drawn uniformly from `0..n` with replacement.
pub fn sample_with_replacement<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Vec<usize> {
    (0..m).map(|_| rng.gen_range(0..n)).collect()
}

/// `m` distinct indices from `0..n` (partial Fisher-Yates), `m <= n`.
pub fn sample_without_replacement<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Vec<usize> {
    assert!(m <= n, "cannot draw {m} distinct items from {n}");
    let mut pool: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let pick = rng.gen_range(k..n);
        pool.swap(k, pick);
    }
    pool.truncate(m);
    pool
}

/// Categorical sampler over a fixed weight vector (inverse CDF on the
/// cumulative sums).
#[derive(Debug, Clone)]
pub struct Categorical {
    cumulative: Vec<f64>,
}

impl Categorical {
    /// Weights need not be normalized but must be non-negative with a
    /// positive total.
    pub fn new(weights: &[f64]) -> Option<Self> {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return None;
            }
            acc += w;
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return None;
        }
        Some(Self { cumulative })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        // skip trailing zero-weight entries that share the final cumulative value
        let mut idx = idx.min(self.cumulative.len() - 1);
        while idx > 0 && self.cumulative[idx] == self.cumulative[idx - 1] {
            idx -= 1;
        }
        idx
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> Vec<usize> {
        (0..m).map(|_| self.sample(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_per_stream() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(7, 0));
    }

    #[test]
    fn categorical_never_picks_zero_weight() {
        let cat = Categorical::new(&[0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        let mut rng = seeded(3);
        for _ in 0..10_000 {
            let k = cat.sample(&mut rng);
            assert!(k == 1 || k == 3, "picked {k}");
        }
    }

    #[test]
    fn categorical_rejects_bad_weights() {
        assert!(Categorical::new(&[0.0, 0.0]).is_none());
        assert!(Categorical::new(&[1.0, -0.1]).is_none());
        assert!(Categorical::new(&[f64::NAN]).is_none());
    }

    #[test]
    fn without_replacement_is_distinct() {
        let mut rng = seeded(11);
        let mut v = sample_without_replacement(&mut rng, 50, 50);
        v.sort_unstable();
        assert_eq!(v, (0..50).collect::<Vec<_>>());
    }
}
