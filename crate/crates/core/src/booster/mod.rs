//! Training drivers: GBM, AGBM, the vanilla accelerated variant (VAGBM) and
//! restarted AGBM (AGBMR).
//!
//! Every driver starts from `f^0 = 0`, tracks the training predictions of
//! its ensembles incrementally, and returns the final model, a per-iteration
//! trace and the tracked `f^M(X)`.

mod accelerated;
mod config;
mod gbm;
mod line_search;
mod model;
mod trace;

use std::time::Instant;

pub use accelerated::{train_agbm, train_agbmr, train_vagbm, MomentumState};
pub use config::{restart_period, Algorithm, BoostConfig, RestartOption, DEFAULT_GAMMA};
pub use gbm::train_gbm;
pub use line_search::golden_section;
pub use model::{EnsembleModel, Member, MODEL_FORMAT, MODEL_VERSION};
pub use trace::{InvariantCheck, IterationRecord, Phase, TrainTrace, TRACE_HEADER};

use crate::dataset::Dataset;
use crate::error::{BoostError, Result};
use crate::loss::Loss;

/// Training loss above which a run is declared divergent and stopped.
pub const DIVERGENCE_CAP: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: EnsembleModel,
    pub trace: TrainTrace,
    /// `f^M(X)` as tracked during training.
    pub train_predictions: Vec<f64>,
}

/// Runs the driver selected by `config.algorithm`.
pub fn train(
    train: &Dataset,
    loss: &Loss,
    config: &BoostConfig,
    test: Option<&Dataset>,
) -> Result<TrainResult> {
    match config.algorithm {
        Algorithm::Gbm => train_gbm(train, loss, config, test),
        Algorithm::Agbm => train_agbm(train, loss, config, test),
        Algorithm::Vagbm => train_vagbm(train, loss, config, test),
        Algorithm::Agbmr => train_agbmr(train, loss, config, test),
    }
}

fn check_inputs(
    expected: Algorithm,
    train: &Dataset,
    loss: &Loss,
    config: &BoostConfig,
    test: Option<&Dataset>,
) -> Result<()> {
    if config.algorithm != expected {
        return Err(BoostError::config(format!(
            "{} driver called with algorithm {}",
            expected.name(),
            config.algorithm.name()
        )));
    }
    config.validate()?;
    loss.check_labels(train.labels())?;
    if let Some(test) = test {
        loss.check_labels(test.labels())?;
        if test.n_features() != train.n_features() {
            return Err(BoostError::input(format!(
                "test set has {} features, training set has {}",
                test.n_features(),
                train.n_features()
            )));
        }
    }
    Ok(())
}

struct Clock {
    start: Instant,
    enabled: bool,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Clock {
            start: Instant::now(),
            enabled,
        }
    }

    fn elapsed_ms(&self) -> f64 {
        if self.enabled {
            self.start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }
}

/// Patience counter on the test loss.
struct EarlyStop {
    rounds: Option<usize>,
    best: f64,
    stale: usize,
}

impl EarlyStop {
    fn new(rounds: Option<usize>, initial: Option<f64>) -> Self {
        EarlyStop {
            rounds,
            best: initial.unwrap_or(f64::INFINITY),
            stale: 0,
        }
    }

    fn should_stop(&mut self, test_loss: Option<f64>) -> bool {
        let (Some(rounds), Some(loss)) = (self.rounds, test_loss) else {
            return false;
        };
        if loss < self.best {
            self.best = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= rounds
    }
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diverging(loss: f64) -> bool {
    !loss.is_finite() || loss > DIVERGENCE_CAP
}
