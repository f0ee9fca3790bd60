//! Additive ensembles `intercept + sum_k coefficient_k * learner_k(x)` and
//! their JSON persistence.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{BoostError, Result};
use crate::learners::{Learner, RegressionTree};
use crate::loss::Loss;

pub const MODEL_FORMAT: &str = "agboost-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub coefficient: f64,
    pub learner: Learner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    members: Vec<Member>,
    loss: Loss,
    intercept: f64,
}

impl EnsembleModel {
    pub fn new(loss: Loss) -> Self {
        EnsembleModel {
            members: Vec::new(),
            loss,
            intercept: 0.0,
        }
    }

    pub fn from_members(loss: Loss, intercept: f64, members: Vec<Member>) -> Self {
        EnsembleModel {
            members,
            loss,
            intercept,
        }
    }

    pub fn push(&mut self, coefficient: f64, learner: Learner) {
        self.members.push(Member {
            coefficient,
            learner,
        });
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn loss(&self) -> &Loss {
        &self.loss
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>> {
        let mut out = vec![self.intercept; rows.rows()];
        for m in &self.members {
            let p = m.learner.predict(rows)?;
            for (o, v) in out.iter_mut().zip(p) {
                *o += m.coefficient * v;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let members = self
            .members
            .iter()
            .map(|m| match &m.learner {
                Learner::Tree(tree) => Ok(MemberFile {
                    coefficient: m.coefficient,
                    tree: tree.clone(),
                }),
                Learner::Oracle(_) => Err(BoostError::input(
                    "oracle learners reference training rows and cannot be saved",
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            loss: self.loss,
            intercept: self.intercept,
            members,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(BoostError::Format(format!("not a model file: format '{}'", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(BoostError::Format(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let members = file
            .members
            .into_iter()
            .map(|m| {
                m.tree.check_structure()?;
                Ok(Member {
                    coefficient: m.coefficient,
                    learner: Learner::Tree(m.tree),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsembleModel {
            members,
            loss: file.loss,
            intercept: file.intercept,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    loss: Loss,
    intercept: f64,
    members: Vec<MemberFile>,
}

#[derive(Serialize, Deserialize)]
struct MemberFile {
    coefficient: f64,
    tree: RegressionTree,
}
