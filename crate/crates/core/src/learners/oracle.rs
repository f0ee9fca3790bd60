//! Exact-fit learner used to check rates under a complete learner class.

use std::collections::HashMap;
use std::sync::Arc;

use crate::dataset::Matrix;
use crate::error::{BoostError, Result};

/// The training rows an oracle memorizes against, shared by every oracle
/// fitted in one run.
#[derive(Debug)]
pub struct OracleBasis {
    rows: Matrix,
    lookup: HashMap<Vec<u64>, usize>,
}

impl OracleBasis {
    pub fn new(rows: Matrix) -> Arc<Self> {
        let mut lookup = HashMap::with_capacity(rows.rows());
        for i in 0..rows.rows() {
            lookup.entry(row_key(rows.row(i))).or_insert(i);
        }
        Arc::new(OracleBasis { rows, lookup })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.rows()
    }
}

fn row_key(row: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 route identically in trees, so treat them as one key.
    row.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Predicts `memorized[i]` on training row `i` and zero on unseen rows.
#[derive(Debug, Clone)]
pub struct OracleLearner {
    memorized: Vec<f64>,
    basis: Arc<OracleBasis>,
}

impl PartialEq for OracleLearner {
    fn eq(&self, other: &Self) -> bool {
        self.memorized == other.memorized && Arc::ptr_eq(&self.basis, &other.basis)
    }
}

impl OracleLearner {
    pub fn memorized(&self) -> &[f64] {
        &self.memorized
    }

    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>> {
        if rows.cols() != self.basis.rows.cols() {
            return Err(BoostError::input(format!(
                "oracle expects {} columns, got {}",
                self.basis.rows.cols(),
                rows.cols()
            )));
        }
        // The training matrix itself maps by position, so duplicate rows
        // still reproduce their own targets.
        if *rows == self.basis.rows {
            return Ok(self.memorized.clone());
        }
        Ok((0..rows.rows())
            .map(|i| {
                self.basis
                    .lookup
                    .get(&row_key(rows.row(i)))
                    .map_or(0.0, |&k| self.memorized[k])
            })
            .collect())
    }

    pub fn scaled(&self, factor: f64) -> OracleLearner {
        OracleLearner {
            memorized: self.memorized.iter().map(|v| v * factor).collect(),
            basis: Arc::clone(&self.basis),
        }
    }
}

pub fn fit_oracle(target: &[f64], basis: &Arc<OracleBasis>) -> Result<OracleLearner> {
    if target.len() != basis.n_rows() {
        return Err(BoostError::input(format!(
            "target has {} values for {} training rows",
            target.len(),
            basis.n_rows()
        )));
    }
    Ok(OracleLearner {
        memorized: target.to_vec(),
        basis: Arc::clone(basis),
    })
}
