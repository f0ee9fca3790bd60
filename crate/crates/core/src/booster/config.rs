use serde::{Deserialize, Serialize};

use crate::error::{BoostError, Result};
use crate::learners::{LearnerKind, TreeConfig};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gbm,
    Agbm,
    Vagbm,
    Agbmr,
}

impl Algorithm {
    /// Learners fitted per boosting iteration.
    pub fn trees_per_iteration(self) -> usize {
        match self {
            Algorithm::Gbm | Algorithm::Vagbm => 1,
            Algorithm::Agbm | Algorithm::Agbmr => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gbm => "gbm",
            Algorithm::Agbm => "agbm",
            Algorithm::Vagbm => "vagbm",
            Algorithm::Agbmr => "agbmr",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = BoostError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbm" => Ok(Algorithm::Gbm),
            "agbm" => Ok(Algorithm::Agbm),
            "vagbm" => Ok(Algorithm::Vagbm),
            "agbmr" => Ok(Algorithm::Agbmr),
            other => Err(BoostError::config(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartOption {
    /// Restart every `ceil(sqrt(2 / (eta gamma mu)))` iterations.
    FixedPeriod,
    /// Restart when the training loss goes up.
    Adaptive,
}

/// Momentum parameter used when none is given.
pub const DEFAULT_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub line_search: bool,
    pub restart_option: RestartOption,
    pub mu: Option<f64>,
    pub tree: TreeConfig,
    pub learner_kind: LearnerKind,
    /// Stop once the test loss has not improved for this many iterations.
    pub early_stop_rounds: Option<usize>,
    /// Fill `wall_time_ms`; off keeps traces byte-reproducible.
    pub record_time: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl BoostConfig {
    pub fn new(algorithm: Algorithm, eta: f64, iterations: usize) -> Self {
        BoostConfig {
            algorithm,
            eta,
            gamma: DEFAULT_GAMMA,
            iterations,
            line_search: false,
            restart_option: RestartOption::Adaptive,
            mu: None,
            tree: TreeConfig::default(),
            learner_kind: LearnerKind::Tree,
            early_stop_rounds: None,
            record_time: false,
            exec: Exec::default(),
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_learner(mut self, kind: LearnerKind) -> Self {
        self.learner_kind = kind;
        self
    }

    pub fn with_tree(mut self, tree: TreeConfig) -> Self {
        self.tree = tree;
        self
    }

    pub fn with_line_search(mut self, on: bool) -> Self {
        self.line_search = on;
        self
    }

    pub fn with_restart(mut self, option: RestartOption, mu: Option<f64>) -> Self {
        self.restart_option = option;
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(BoostError::config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(BoostError::config(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.iterations == 0 {
            return Err(BoostError::config("iterations must be at least 1"));
        }
        if self.algorithm == Algorithm::Agbmr && self.restart_option == RestartOption::FixedPeriod {
            match self.mu {
                Some(mu) if mu.is_finite() && mu > 0.0 => {}
                Some(mu) => return Err(BoostError::config(format!("mu must be positive, got {mu}"))),
                None => {
                    return Err(BoostError::config(
                        "fixed-period restarts need the strong-convexity constant mu",
                    ))
                }
            }
        }
        if self.early_stop_rounds == Some(0) {
            return Err(BoostError::config("early_stop_rounds must be at least 1"));
        }
        self.tree.validate()
    }

    /// Iterations per phase for fixed-period restarts.
    pub fn restart_period(&self) -> Option<usize> {
        let mu = self.mu?;
        Some(restart_period(self.eta, self.gamma, mu))
    }
}

/// `ceil(sqrt(2 / (eta gamma mu)))`.
pub fn restart_period(eta: f64, gamma: f64, mu: f64) -> usize {
    let exact = (2.0 / (eta * gamma * mu)).sqrt();
    // Guard against sqrt(10) style values landing a hair above an integer.
    let rounded = exact.round();
    let period = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
    (period as usize).max(1)
}
