//! Seeded random number generation.
//!
//! Every randomized path draws from a ChaCha8 stream derived from a `u64`
//! seed. ChaCha is counter based, so independent sub-streams are obtained by
//! selecting a different stream id rather than by reseeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type FwRng = ChaCha8Rng;

/// Generator for `seed`, stream 0.
pub fn seeded(seed: u64) -> FwRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-stream `stream` of `seed`.
pub fn split(seed: u64, stream: u64) -> FwRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng
}

/// Uniformly distributed unit vector.
pub fn unit_sphere(rng: &mut FwRng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = crate::linalg::norm2(&v);
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn gaussian(rng: &mut FwRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vec(rng: &mut FwRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform point of the probability simplex (normalized exponentials).
pub fn simplex_point(rng: &mut FwRng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}
