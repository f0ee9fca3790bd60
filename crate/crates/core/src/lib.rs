//! Gradient boosting with Nesterov-accelerated ensembles.
//!
//! Drivers for classic GBM, accelerated GBM with corrected residuals, its
//! restarted form and the vanilla (uncorrected) momentum variant, over CART
//! regression trees or an exact-fit oracle learner. The [`diagnostics`]
//! module checks traces against the convergence bounds.

pub mod booster;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod diagnostics;
pub mod learners;
pub mod loss;
pub mod par;
pub mod synth;
pub mod verify;

pub use booster::{
    train, train_agbm, train_agbmr, train_gbm, train_vagbm, Algorithm, BoostConfig, EnsembleModel,
    RestartOption, TrainResult, TrainTrace,
};
pub use dataset::{Dataset, Matrix};
pub use error::{BoostError, Result};
pub use learners::{LearnerKind, TreeConfig};
pub use loss::{Loss, LossKind};
pub use par::Exec;
