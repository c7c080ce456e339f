//! Seeded random sampling shared by tests, suites and toys.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::C64;

pub type Rng64 = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream from a base seed and a label.
pub fn derive(seed: u64, stream: u64) -> Rng64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn uniform(rng: &mut Rng64, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

pub fn vec(rng: &mut Rng64, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn mat(rng: &mut Rng64, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows).map(|_| vec(rng, cols, scale)).collect()
}

pub fn cvec(rng: &mut Rng64, n: usize, scale: f64) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
        .collect()
}

/// Random point in a cube of half-width `scale`.
pub fn point(rng: &mut Rng64, scale: f64) -> [f64; 3] {
    [
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    ]
}
