//! Shared fixtures for the criterion benches.

use fedloc_core::seed;
use fedloc_core::WeightVector;
use rand::Rng;

/// Parameter count of the default classifier on a 172-AP, 61-RP building.
pub const SNN_PARAMS: usize = 70_845;

pub fn random_vector(len: usize, seed: u64) -> WeightVector {
    let mut rng = seed::rng(seed);
    WeightVector::flat((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// `count` fingerprints of `dim` values in [0, 1] with labels in `0..classes`.
pub fn random_batch(count: usize, dim: usize, classes: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = seed::rng(seed);
    let x = (0..count).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect();
    let y = (0..count).map(|_| rng.gen_range(0..classes)).collect();
    (x, y)
}
