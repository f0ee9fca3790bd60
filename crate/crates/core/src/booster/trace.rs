use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::Algorithm;
use crate::error::Result;

pub const TRACE_HEADER: &str =
    "iteration,trees,train_loss,test_loss,residual_norm,cos_r,cos_c,wall_time_ms";

/// Per-iteration checks of the accelerated updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    /// `L(g^m)`.
    pub loss_at_g: f64,
    /// `L(g) - eta/2 |r|^2 + eta/2 |b1(X) - r|^2 - L(f^{m+1})`; nonnegative
    /// whenever `eta <= 1/sigma`.
    pub decrease_margin: f64,
    /// `max_i |hhat - h - alpha (c - b2(X))|`, corrected variant only.
    pub hhat_gap: Option<f64>,
    /// Scale of `hhat` (max abs entry) for judging `hhat_gap`.
    pub hhat_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub trees: usize,
    /// Loss of `f^{iteration + 1}`.
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    /// `|r^m|`.
    pub residual_norm: f64,
    pub cos_r: f64,
    pub cos_c: Option<f64>,
    pub bound_rhs: Option<f64>,
    pub wall_time_ms: f64,
    /// Coefficient applied to the residual fit.
    pub step: f64,
    /// A fit returned all-zero training predictions.
    pub skipped: bool,
    pub invariants: Option<InvariantCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub first_iteration: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub algorithm: Algorithm,
    /// `L(f^0)`.
    pub initial_train_loss: f64,
    pub initial_test_loss: Option<f64>,
    pub records: Vec<IterationRecord>,
    /// Training loss blew past the divergence cap.
    pub diverged: bool,
    pub early_stopped: bool,
    /// Restart phases; a single phase for non-restarted runs.
    pub phases: Vec<Phase>,
    /// Iterations whose update was rolled back by an adaptive restart.
    pub discarded_iterations: usize,
}

impl TrainTrace {
    pub fn new(algorithm: Algorithm, initial_train_loss: f64, initial_test_loss: Option<f64>) -> Self {
        TrainTrace {
            algorithm,
            initial_train_loss,
            initial_test_loss,
            records: Vec::new(),
            diverged: false,
            early_stopped: false,
            phases: Vec::new(),
            discarded_iterations: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `L(f^0), L(f^1), ..., L(f^M)`.
    pub fn train_losses(&self) -> Vec<f64> {
        std::iter::once(self.initial_train_loss)
            .chain(self.records.iter().map(|r| r.train_loss))
            .collect()
    }

    pub fn final_train_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_train_loss, |r| r.train_loss)
    }

    /// Training loss at the start of each phase, followed by the loss at the
    /// end of the last phase.
    pub fn phase_boundary_losses(&self) -> Vec<f64> {
        let losses = self.train_losses();
        let mut out: Vec<f64> = self.phases.iter().map(|p| losses[p.first_iteration]).collect();
        if let Some(last) = self.phases.last() {
            out.push(losses[last.first_iteration + last.iterations]);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.iteration,
                r.trees,
                r.train_loss,
                opt(r.test_loss),
                r.residual_norm,
                r.cos_r,
                opt(r.cos_c),
                r.wall_time_ms
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
