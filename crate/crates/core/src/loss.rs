//! Pointwise losses `l(y, f)` with their regularity constants.
//!
//! Totals are sums over samples, not means. Logistic labels are `-1`/`+1`;
//! see [`crate::dataset::Dataset::to_signed_labels`] for `{0, 1}` inputs.

use serde::{Deserialize, Serialize};

use crate::error::{BoostError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    LeastSquares,
    Logistic,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossKind::LeastSquares => write!(f, "least_squares"),
            LossKind::Logistic => write!(f, "logistic"),
        }
    }
}

/// A loss together with its smoothness `sigma` and strong-convexity `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    kind: LossKind,
    sigma: f64,
    mu: f64,
}

impl Loss {
    pub fn least_squares() -> Self {
        Loss {
            kind: LossKind::LeastSquares,
            sigma: 1.0,
            mu: 1.0,
        }
    }

    /// `log(1 + exp(-y f))`; its second derivative peaks at `1/4`.
    pub fn logistic() -> Self {
        Loss {
            kind: LossKind::Logistic,
            sigma: 0.25,
            mu: 0.0,
        }
    }

    pub fn from_kind(kind: LossKind) -> Self {
        match kind {
            LossKind::LeastSquares => Self::least_squares(),
            LossKind::Logistic => Self::logistic(),
        }
    }

    /// Builds a loss with explicit constants, e.g. a rescaled least-squares
    /// objective. Requires `sigma > 0` and `0 <= mu <= sigma`.
    pub fn with_constants(kind: LossKind, sigma: f64, mu: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(BoostError::input(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(mu.is_finite() && mu >= 0.0 && mu <= sigma) {
            return Err(BoostError::input(format!(
                "mu must lie in [0, sigma={sigma}], got {mu}"
            )));
        }
        Ok(Loss { kind, sigma, mu })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `1 / sigma`, the largest step size covered by the convergence bounds.
    pub fn default_step_size(&self) -> f64 {
        1.0 / self.sigma
    }

    pub fn check_label(&self, y: f64) -> Result<()> {
        match self.kind {
            LossKind::LeastSquares if y.is_finite() => Ok(()),
            LossKind::LeastSquares => Err(BoostError::input(format!("non-finite label {y}"))),
            LossKind::Logistic if y == 1.0 || y == -1.0 => Ok(()),
            LossKind::Logistic => Err(BoostError::input(format!(
                "logistic loss expects labels in {{-1, +1}}, got {y}"
            ))),
        }
    }

    pub fn check_labels(&self, labels: &[f64]) -> Result<()> {
        labels.iter().try_for_each(|&y| self.check_label(y))
    }

    pub fn value(&self, y: f64, f: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.value_unchecked(y, f))
    }

    /// `d l(y, f) / d f`.
    pub fn derivative(&self, y: f64, f: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.derivative_unchecked(y, f))
    }

    pub(crate) fn value_unchecked(&self, y: f64, f: f64) -> f64 {
        match self.kind {
            LossKind::LeastSquares => {
                let d = y - f;
                0.5 * d * d
            }
            LossKind::Logistic => softplus(-y * f),
        }
    }

    pub(crate) fn derivative_unchecked(&self, y: f64, f: f64) -> f64 {
        match self.kind {
            LossKind::LeastSquares => f - y,
            // -y / (1 + e^{yf}); exp overflow gives the correct limit 0.
            LossKind::Logistic => -y / (1.0 + (y * f).exp()),
        }
    }

    /// Sum of pointwise losses.
    pub fn total_loss(&self, labels: &[f64], predictions: &[f64]) -> Result<f64> {
        check_lengths(labels, predictions)?;
        self.check_labels(labels)?;
        Ok(self.total_loss_unchecked(labels, predictions))
    }

    pub(crate) fn total_loss_unchecked(&self, labels: &[f64], predictions: &[f64]) -> f64 {
        labels
            .iter()
            .zip(predictions)
            .map(|(&y, &f)| self.value_unchecked(y, f))
            .sum()
    }

    /// Negative gradient of the total loss with respect to the predictions.
    pub fn pseudo_residual(&self, labels: &[f64], predictions: &[f64]) -> Result<Vec<f64>> {
        check_lengths(labels, predictions)?;
        self.check_labels(labels)?;
        Ok(self.pseudo_residual_unchecked(labels, predictions))
    }

    pub(crate) fn pseudo_residual_unchecked(&self, labels: &[f64], predictions: &[f64]) -> Vec<f64> {
        labels
            .iter()
            .zip(predictions)
            .map(|(&y, &f)| -self.derivative_unchecked(y, f))
            .collect()
    }
}

fn check_lengths(labels: &[f64], predictions: &[f64]) -> Result<()> {
    if labels.is_empty() {
        return Err(BoostError::input("empty label vector"));
    }
    if labels.len() != predictions.len() {
        return Err(BoostError::input(format!(
            "length mismatch: {} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    Ok(())
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}
