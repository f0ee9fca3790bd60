//! Weak learners: regression trees and the exact-fit oracle.

mod oracle;
mod tree;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use oracle::{fit_oracle, OracleBasis, OracleLearner};
pub use tree::{fit_tree, fit_tree_binned, BinnedFeatures, Node, RegressionTree, TreeConfig, TreeFit};

use crate::dataset::{build_quantile_index, Dataset, Matrix, QuantileIndex};
use crate::error::Result;
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    #[default]
    Tree,
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Tree(RegressionTree),
    Oracle(OracleLearner),
}

impl Learner {
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>> {
        match self {
            Learner::Tree(t) => t.predict(rows),
            Learner::Oracle(o) => o.predict(rows),
        }
    }

    pub fn scaled(&self, factor: f64) -> Learner {
        match self {
            Learner::Tree(t) => Learner::Tree(t.scaled(factor)),
            Learner::Oracle(o) => Learner::Oracle(o.scaled(factor)),
        }
    }

    pub fn as_tree(&self) -> Option<&RegressionTree> {
        match self {
            Learner::Tree(t) => Some(t),
            Learner::Oracle(_) => None,
        }
    }
}

/// `<target, predictions> / (|target| |predictions|)`, or 0 when either
/// vector is zero.
pub fn cosine_fit(target: &[f64], predictions: &[f64]) -> f64 {
    debug_assert_eq!(target.len(), predictions.len());
    let (mut dot, mut tt, mut pp) = (0.0, 0.0, 0.0);
    for (&t, &p) in target.iter().zip(predictions) {
        dot += t * p;
        tt += t * t;
        pp += p * p;
    }
    if tt == 0.0 || pp == 0.0 {
        return 0.0;
    }
    (dot / (tt * pp).sqrt()).clamp(-1.0, 1.0)
}

/// A fitted learner with its predictions on the training rows.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub learner: Learner,
    pub train_predictions: Vec<f64>,
}

/// Fits learners of one kind against a fixed training set. Quantile bins or
/// the oracle basis are prepared once and reused for every fit.
#[derive(Debug)]
pub struct LearnerFitter {
    config: TreeConfig,
    exec: Exec,
    prepared: Prepared,
}

#[derive(Debug)]
enum Prepared {
    Tree {
        index: QuantileIndex,
        binned: BinnedFeatures,
    },
    Oracle(Arc<OracleBasis>),
}

impl LearnerFitter {
    pub fn new(kind: LearnerKind, train: &Dataset, config: TreeConfig, exec: Exec) -> Result<Self> {
        config.validate()?;
        let prepared = match kind {
            LearnerKind::Tree => {
                let index = build_quantile_index(train, config.quantiles)?;
                let binned = BinnedFeatures::new(train, &index)?;
                Prepared::Tree { index, binned }
            }
            LearnerKind::Oracle => Prepared::Oracle(OracleBasis::new(train.features().clone())),
        };
        Ok(LearnerFitter {
            config,
            exec,
            prepared,
        })
    }

    pub fn fit(&self, target: &[f64]) -> Result<Fitted> {
        match &self.prepared {
            Prepared::Tree { index, binned } => {
                let fit = fit_tree_binned(target, binned, index, &self.config, self.exec)?;
                Ok(Fitted {
                    learner: Learner::Tree(fit.tree),
                    train_predictions: fit.train_predictions,
                })
            }
            Prepared::Oracle(basis) => {
                let oracle = fit_oracle(target, basis)?;
                Ok(Fitted {
                    train_predictions: oracle.memorized().to_vec(),
                    learner: Learner::Oracle(oracle),
                })
            }
        }
    }
}
