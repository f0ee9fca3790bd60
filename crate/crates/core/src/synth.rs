//! Seeded synthetic problems for the verification suites and benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Matrix};
use crate::error::Result;

fn features(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Matrix {
    let data: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::new(data, n, p).expect("shape is consistent")
}

fn weights(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y = <w, x> + sin(3 x_0) + noise`, features uniform on `[-1, 1]`.
pub fn regression(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = features(&mut rng, n, p);
    let w = weights(&mut rng, p);
    let labels = (0..n)
        .map(|i| {
            let row = x.row(i);
            dot(row, &w) + (3.0 * row[0]).sin() + rng.random_range(-0.5..0.5)
        })
        .collect();
    Dataset::new(x, labels)
}

/// Labels in `{-1, +1}` drawn from a logistic model on a random linear
/// score, so both classes overlap.
pub fn classification(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = features(&mut rng, n, p);
    let w = weights(&mut rng, p);
    let labels = (0..n)
        .map(|i| {
            let prob = 1.0 / (1.0 + (-dot(x.row(i), &w)).exp());
            if rng.random::<f64>() < prob {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Dataset::new(x, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let a = regression(50, 5, 3).unwrap();
        assert_eq!((a.n_rows(), a.n_features()), (50, 5));
        assert_eq!(a, regression(50, 5, 3).unwrap());
        assert_ne!(a, regression(50, 5, 4).unwrap());

        let c = classification(200, 5, 1).unwrap();
        assert!(c.labels().iter().all(|&y| y == 1.0 || y == -1.0));
        assert!(c.labels().contains(&1.0) && c.labels().contains(&-1.0));
    }
}
