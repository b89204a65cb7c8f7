//! Deterministic, splittable random streams.
//!
//! An [`RngState`] is a `(seed, stream)` pair. It is turned into a ChaCha8
//! generator on demand; ChaCha keeps a 64-bit stream id next to its key, so
//! distinct streams under one seed are independent keystreams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the crate.
pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Child state for `stream`. The child key mixes the parent's seed and
    /// stream, so forking two different parents never aliases.
    pub fn fork(&self, stream: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(self.stream)),
            stream,
        }
    }

    pub fn rng(&self) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Free-function form of [`RngState::fork`].
pub fn rng_fork(parent: RngState, stream: u64) -> RngState {
    parent.fork(stream)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn draws(state: RngState, n: usize) -> Vec<u64> {
        let mut rng = state.rng();
        (0..n).map(|_| rng.random::<u64>()).collect()
    }

    fn uniforms(state: RngState, n: usize) -> Vec<f64> {
        let mut rng = state.rng();
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn same_fork_reproduces() {
        let root = RngState::new(7);
        assert_eq!(draws(root.fork(0), 1000), draws(root.fork(0), 1000));
    }

    #[test]
    fn distinct_streams_differ() {
        let root = RngState::new(7);
        let a = draws(root.fork(0), 1000);
        let b = draws(root.fork(1), 1000);
        let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count();
        assert!(differing >= 900, "only {differing} positions differ");
    }

    #[test]
    fn streams_are_uncorrelated() {
        let root = RngState::new(7);
        let seqs: Vec<Vec<f64>> = (0..32).map(|s| uniforms(root.fork(s), 10_000)).collect();
        for i in 0..seqs.len() {
            for j in (i + 1)..seqs.len() {
                let r = pearson(&seqs[i], &seqs[j]);
                assert!(r.abs() < 0.05, "streams {i},{j} correlate: r = {r}");
            }
        }
    }

    #[test]
    fn nested_forks_do_not_alias() {
        let root = RngState::new(7);
        assert_ne!(root.fork(1).fork(0), root.fork(0).fork(0));
        assert_ne!(draws(root.fork(1).fork(0), 8), draws(root.fork(0), 8));
    }
}
