//! Counter-based randomness for reproducible, order-independent sampling.
//!
//! Every Bernoulli draw is a pure function of (seed, stream, counter), so
//! replicates can run on any number of threads and in any order without
//! changing results, and configurations at different densities sampled from
//! the same seed are monotonically coupled.

/// splitmix64 finalizer; good avalanche, cheap, stateless.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A keyed family of uniform u64 values indexed by (stream, counter).
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    #[inline]
    pub fn uniform(&self, stream: u64, counter: u64) -> u64 {
        mix64(mix64(self.seed ^ mix64(stream)).wrapping_add(counter))
    }

    /// Bernoulli(p) draw; for a fixed (stream, counter) the outcome is
    /// monotone in p, which gives a monotone coupling across densities.
    #[inline]
    pub fn bernoulli(&self, stream: u64, counter: u64, threshold: u64) -> bool {
        self.uniform(stream, counter) < threshold
    }
}

/// Convert a probability to the u64 threshold used by [`CounterRng::bernoulli`].
pub fn probability_threshold(p: f64) -> u64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    if p >= 1.0 {
        u64::MAX
    } else {
        (p * (u64::MAX as f64)) as u64
    }
}

/// Derive a stream id for a replicate of a named experiment.
pub fn stream_id(tag: &str, replicate: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    mix64(h ^ mix64(replicate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_order_free() {
        let rng = CounterRng::new(42);
        let a: Vec<u64> = (0..16).map(|i| rng.uniform(7, i)).collect();
        let b: Vec<u64> = (0..16).rev().map(|i| rng.uniform(7, i)).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn bernoulli_rate_roughly_matches() {
        let rng = CounterRng::new(1);
        let t = probability_threshold(0.25);
        let hits = (0..100_000u64).filter(|&i| rng.bernoulli(3, i, t)).count();
        assert!((hits as f64 / 1e5 - 0.25).abs() < 0.01);
    }

    #[test]
    fn monotone_in_p() {
        let rng = CounterRng::new(9);
        let lo = probability_threshold(0.1);
        let hi = probability_threshold(0.3);
        for i in 0..10_000u64 {
            if rng.bernoulli(0, i, lo) {
                assert!(rng.bernoulli(0, i, hi));
            }
        }
    }
}
