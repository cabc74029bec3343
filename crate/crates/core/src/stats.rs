//! Monte-Carlo plumbing shared by the simulators: per-path random streams
//! and order-independent reductions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// Counter-based generator for path `index`: the same `(seed, index)`
/// always yields the same stream, whichever worker runs it.
pub fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Pairwise (tree) summation in index order.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        2..=8 => xs.iter().fold(T::zero(), |a, &b| a + b),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// Sample mean with standard error `sample std / √paths`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub mean: T,
    pub std_error: T,
    pub paths: usize,
}

impl<T: Real> Estimate<T> {
    pub fn from_samples(xs: &[T]) -> Self {
        let n = xs.len();
        assert!(n >= 2, "need at least two samples");
        let nt = T::lit(n as f64);
        let mean = pairwise_sum(xs) / nt;
        let sq: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / T::lit((n - 1) as f64);
        Self {
            mean,
            std_error: (var / nt).sqrt(),
            paths: n,
        }
    }

    /// `|mean − target| ≤ k·SE + slack`.
    pub fn agrees_with(&self, target: T, k: T, slack: T) -> bool {
        (self.mean - target).abs() <= k * self.std_error + slack
    }
}
