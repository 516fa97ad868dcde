use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::C64;

/// Deterministic random source for one trial.
pub type RngStream = ChaCha12Rng;

/// Opens stream `stream_id` of the ChaCha generator keyed by `seed`.
///
/// Streams share a key but use disjoint nonces, so trials seeded with the
/// same `seed` and distinct ids never overlap.
pub fn rng_stream(seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Circularly-symmetric complex Gaussian with total variance `variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    C64::new(s * standard_normal(rng), s * standard_normal(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = rng_stream(42, 3);
        let mut b = rng_stream(42, 3);
        for _ in 0..100 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = rng_stream(42, 0);
        let mut b = rng_stream(42, 1);
        let xa: Vec<u64> = (0..8).map(|_| a.random()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.random()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn normal_moments() {
        let n = 1_000_000;
        let mut rng = rng_stream(7, 0);
        let mean = (0..n).map(|_| standard_normal(&mut rng)).sum::<f64>() / n as f64;
        // 3σ/√N = 0.003
        assert!(mean.abs() < 0.005, "mean {mean}");

        let mut rng = rng_stream(7, 1);
        let var = (0..n).map(|_| complex_normal(&mut rng, 2.0).norm_sqr()).sum::<f64>() / n as f64;
        assert!((var - 2.0).abs() < 0.02, "var {var}");
    }
}
