//! Gaussian mixture generator for tests, benchmarks and demos.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::DataMatrix;
use crate::rng::RngState;

/// `n` points in `dim` dimensions drawn around `clusters` centers.
///
/// Centers are standard normal vectors; each point is its center plus
/// isotropic noise with standard deviation `spread`. Point `i` belongs to
/// cluster `i % clusters`. Returns the matrix and the cluster labels.
pub fn gaussian_mixture(
    n: usize,
    dim: usize,
    clusters: usize,
    spread: f64,
    seed: u64,
) -> (DataMatrix, Vec<u32>) {
    assert!(
        n >= 1 && dim >= 1 && clusters >= 1,
        "empty mixture requested"
    );
    let root = RngState::new(seed);
    let mut rng = root.fork(0).rng();
    let centers: Vec<f64> = (0..clusters * dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut rng = root.fork(1).rng();
    let mut values = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % clusters;
        labels.push(c as u32);
        for k in 0..dim {
            let noise: f64 = rng.sample(StandardNormal);
            values.push((centers[c * dim + k] + spread * noise) as f32);
        }
    }
    let data = DataMatrix::new(n, dim, values).expect("generated values are finite");
    (data, labels)
}
