#![allow(dead_code)]

use std::path::PathBuf;

use agboost::dataset::{Dataset, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive depth-1 search over every distinct value of every feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
    pub gain: f64,
}

pub fn brute_force_stump(target: &[f64], data: &Dataset) -> Option<Stump> {
    let x = data.features();
    let n = target.len() as f64;
    let total: f64 = target.iter().sum();
    let mut best: Option<Stump> = None;
    for j in 0..x.cols() {
        let mut values: Vec<f64> = x.column(j).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &v in &values {
            let (mut sl, mut nl) = (0.0, 0.0);
            for (i, &t) in target.iter().enumerate() {
                if x.get(i, j) <= v {
                    sl += t;
                    nl += 1.0;
                }
            }
            let (sr, nr) = (total - sl, n - nl);
            if nl == 0.0 || nr == 0.0 {
                continue;
            }
            let gain = sl * sl / nl + sr * sr / nr - total * total / n;
            // Strict improvement keeps the lowest feature, then threshold.
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Stump {
                    feature: j,
                    threshold: v,
                    left: sl / nl,
                    right: sr / nr,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > 0.0)
}

/// `n` rows; even features take integer values below `levels` (ties),
/// odd features are continuous.
pub fn random_instance(seed: u64, n: usize, p: usize, levels: u32) -> (Dataset, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n {
        for j in 0..p {
            data.push(if j % 2 == 0 {
                rng.random_range(0..levels) as f64
            } else {
                rng.random_range(-1.0..1.0)
            });
        }
    }
    let target: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let labels = target.clone();
    (Dataset::new(Matrix::new(data, n, p).unwrap(), labels).unwrap(), target)
}

pub fn data_dir() -> PathBuf {
    std::env::var_os("AGBOOST_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Path of a bundled or user-supplied dataset file, if present.
pub fn dataset_path(name: &str) -> Option<PathBuf> {
    let p = data_dir().join(name);
    p.is_file().then_some(p)
}
