//! Fixed-seed experiments that check the convergence guarantees.
//!
//! Each suite returns a table of named checks. The CLI `verify` command and
//! the acceptance tests run the same code.

use std::fmt;
use std::str::FromStr;

use crate::booster::{train, Algorithm, BoostConfig, RestartOption, TrainResult};
use crate::dataset::Dataset;
use crate::diagnostics::{agbm_bound, fit_slope, reference_optimum};
use crate::error::{BoostError, Result};
use crate::learners::LearnerKind;
use crate::loss::Loss;
use crate::synth;

pub const SEED: u64 = 20;
/// Absolute slack on the per-iteration sufficient-decrease check.
pub const DECREASE_SLACK: f64 = 1e-8;
/// Tolerance on the `hhat` identity, relative to `max(1, |hhat|_inf)`.
pub const HHAT_TOL: f64 = 1e-8;
/// Tolerance on expanded-model predictions, relative to `max(1, |f|_inf)`.
pub const MODEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Bound,
    Restart,
    Slope,
    Invariants,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Bound, Suite::Restart, Suite::Slope, Suite::Invariants];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bound => "bound",
            Suite::Restart => "restart",
            Suite::Slope => "slope",
            Suite::Invariants => "invariants",
        }
    }
}

impl FromStr for Suite {
    type Err = BoostError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| BoostError::config(format!("unknown suite '{s}' (expected bound, restart, slope or invariants)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{mark}  {:width$}  {}", c.name, c.detail)?;
        }
        write!(
            f,
            "suite {}: {}",
            self.suite.name(),
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

pub fn run_suite(suite: Suite) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Bound => bound_suite()?,
        Suite::Restart => restart_suite()?,
        Suite::Slope => slope_suite()?,
        Suite::Invariants => invariants_suite()?,
    };
    Ok(SuiteReport { suite, checks })
}

/// Least-squares problem of the bound and restart experiments.
pub fn regression_problem() -> Result<Dataset> {
    synth::regression(50, 5, SEED)
}

/// Logistic problem of the rate experiment.
pub fn classification_problem() -> Result<Dataset> {
    synth::classification(200, 5, SEED)
}

fn oracle_config(algorithm: Algorithm, eta: f64, gamma: f64, iterations: usize) -> BoostConfig {
    BoostConfig::new(algorithm, eta, iterations)
        .with_gamma(gamma)
        .with_learner(LearnerKind::Oracle)
}

/// Oracle-learner AGBM on the least-squares problem, checked against
/// `L(f^M) <= |y|^2 / (2 eta gamma (M+1)^2)` for `M = 0..=100`.
pub fn bound_check(data: &Dataset, eta: f64, gamma: f64) -> Result<(Check, TrainResult)> {
    let loss = Loss::least_squares();
    let out = train(data, &loss, &oracle_config(Algorithm::Agbm, eta, gamma, 100), None)?;
    let y_sq: f64 = data.labels().iter().map(|y| y * y).sum();
    let report = agbm_bound(&out.trace, y_sq, 0.0, eta, gamma)?;
    let detail = match report.first_violation() {
        None => format!(
            "{} rows, min slack {:.3e}, final loss {:.3e}",
            report.rows.len(),
            report.min_slack(),
            out.trace.final_train_loss()
        ),
        Some(v) => format!("violated at M={}: {:.6e} > {:.6e}", v.m, v.lhs, v.rhs),
    };
    let check = Check::new(
        format!("bound eta={eta} gamma={gamma}"),
        report.all_satisfied(),
        detail,
    );
    Ok((check, out))
}

fn bound_suite() -> Result<Vec<Check>> {
    let data = regression_problem()?;
    let mut checks = Vec::new();
    for eta in [1.0, 0.5] {
        checks.push(bound_check(&data, eta, 0.2)?.0);
    }
    Ok(checks)
}

/// Fixed-period AGBMR with `mu = 1` over `phases` phases; each phase-end
/// gap must at most halve the previous one (plus `1e-12`).
pub fn restart_check(data: &Dataset, eta: f64, gamma: f64, phases: usize) -> Result<(Vec<Check>, TrainResult)> {
    let loss = Loss::least_squares();
    let period = crate::booster::restart_period(eta, gamma, loss.mu());
    let config = oracle_config(Algorithm::Agbmr, eta, gamma, period * phases)
        .with_restart(RestartOption::FixedPeriod, Some(loss.mu()));
    let out = train(data, &loss, &config, None)?;
    let gaps = out.trace.phase_boundary_losses();
    let label = format!("eta={eta} gamma={gamma}");
    let mut checks = vec![Check::new(
        format!("restart period {label}"),
        out.trace.phases.len() == phases && out.trace.phases.iter().all(|p| p.iterations == period),
        format!("period {period}, {} phases", out.trace.phases.len()),
    )];
    let mut worst: Option<(usize, f64, f64)> = None;
    for (p, w) in gaps.windows(2).enumerate() {
        if (w[1].is_nan() || w[1] > 0.5 * w[0] + 1e-12) && worst.is_none() {
            worst = Some((p + 1, w[0], w[1]));
        }
    }
    let detail = match worst {
        None => format!(
            "phase-end gaps {}",
            gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(" ")
        ),
        Some((p, a, b)) => format!("phase {p}: {b:.6e} > {a:.6e}/2"),
    };
    checks.push(Check::new(format!("restart halving {label}"), worst.is_none() && gaps.len() == phases + 1, detail));
    Ok((checks, out))
}

fn restart_suite() -> Result<Vec<Check>> {
    let data = regression_problem()?;
    let mut checks = restart_check(&data, 1.0, 0.2, 5)?.0;
    checks.extend(restart_check(&data, 0.5, 0.2, 5)?.0);
    Ok(checks)
}

/// Outcome of the logistic GBM-vs-AGBM comparison with oracle learners.
#[derive(Debug, Clone)]
pub struct RateOutcome {
    pub l_star: f64,
    pub gbm_gap: f64,
    pub agbm_gap: f64,
    pub agbm_slope: f64,
    pub gbm_slope: f64,
    pub gbm: TrainResult,
    pub agbm: TrainResult,
}

pub const RATE_ITERATIONS: usize = 200;
pub const REFERENCE_ITERATIONS: usize = 100_000;

pub fn rate_experiment(data: &Dataset) -> Result<RateOutcome> {
    let loss = Loss::logistic();
    let eta = loss.default_step_size();
    let gamma = 0.2;
    let gbm = train(data, &loss, &oracle_config(Algorithm::Gbm, eta, gamma, RATE_ITERATIONS), None)?;
    let agbm = train(data, &loss, &oracle_config(Algorithm::Agbm, eta, gamma, RATE_ITERATIONS), None)?;
    let reference = reference_optimum(&loss, data.labels(), REFERENCE_ITERATIONS, eta, gamma)?;
    let l_star = gbm
        .trace
        .train_losses()
        .into_iter()
        .chain(agbm.trace.train_losses())
        .fold(reference, f64::min);
    let gbm_gap = gbm.trace.final_train_loss() - l_star;
    let agbm_gap = agbm.trace.final_train_loss() - l_star;
    let window = 20..=RATE_ITERATIONS;
    let agbm_slope = fit_slope(&agbm.trace, l_star, window.clone())?.slope;
    let gbm_slope = fit_slope(&gbm.trace, l_star, window)?.slope;
    Ok(RateOutcome {
        l_star,
        gbm_gap,
        agbm_gap,
        agbm_slope,
        gbm_slope,
        gbm,
        agbm,
    })
}

fn slope_suite() -> Result<Vec<Check>> {
    let r = rate_experiment(&classification_problem()?)?;
    Ok(vec![
        Check::new(
            "gap ratio at m=200",
            r.agbm_gap <= 0.2 * r.gbm_gap,
            format!(
                "agbm {:.4e} vs gbm {:.4e} (ratio {:.3}, need <= 0.2)",
                r.agbm_gap,
                r.gbm_gap,
                r.agbm_gap / r.gbm_gap
            ),
        ),
        Check::new(
            "agbm slope over [20, 200]",
            r.agbm_slope <= -1.5,
            format!("{:.3} (gbm {:.3}), need <= -1.5", r.agbm_slope, r.gbm_slope),
        ),
    ])
}

/// Per-iteration sufficient decrease and `hhat` identity over an
/// accelerated run.
pub fn invariant_checks(name: &str, result: &TrainResult) -> Vec<Check> {
    let records = &result.trace.records;
    let mut worst_margin = f64::INFINITY;
    let mut worst_gap = 0.0f64;
    let mut checked_gap = false;
    let mut missing = 0;
    for r in records {
        let Some(inv) = r.invariants else {
            missing += 1;
            continue;
        };
        worst_margin = worst_margin.min(inv.decrease_margin);
        if let (Some(gap), Some(scale)) = (inv.hhat_gap, inv.hhat_scale) {
            checked_gap = true;
            worst_gap = worst_gap.max(gap / scale.max(1.0));
        }
    }
    let mut checks = vec![Check::new(
        format!("{name}: sufficient decrease"),
        missing == 0 && !records.is_empty() && worst_margin >= -DECREASE_SLACK,
        format!("{} iterations, min margin {:.3e}", records.len(), worst_margin),
    )];
    if checked_gap {
        checks.push(Check::new(
            format!("{name}: hhat identity"),
            worst_gap <= HHAT_TOL,
            format!("max relative gap {worst_gap:.3e}"),
        ));
    }
    checks
}

/// Expanded model versus the tracked `f^M(X)` on the training rows.
pub fn model_consistency(name: &str, result: &TrainResult, train: &Dataset) -> Result<Check> {
    let pred = result.model.predict(train.features())?;
    let scale = result
        .train_predictions
        .iter()
        .fold(1.0f64, |a, v| a.max(v.abs()));
    let err = pred
        .iter()
        .zip(&result.train_predictions)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale;
    Ok(Check::new(
        format!("{name}: expanded model"),
        err <= MODEL_TOL,
        format!("{} members, max relative error {err:.3e}", result.model.members().len()),
    ))
}

fn invariants_suite() -> Result<Vec<Check>> {
    let reg = regression_problem()?;
    let cls = classification_problem()?;
    let mut runs: Vec<(String, TrainResult, &Dataset)> = Vec::new();

    let (_, out) = bound_check(&reg, 1.0, 0.2)?;
    runs.push(("oracle ls eta=1".into(), out, &reg));
    let (_, out) = bound_check(&reg, 0.5, 0.2)?;
    runs.push(("oracle ls eta=0.5".into(), out, &reg));
    let (_, out) = restart_check(&reg, 1.0, 0.2, 5)?;
    runs.push(("oracle agbmr".into(), out, &reg));

    let rate = rate_experiment(&cls)?;
    runs.push(("oracle logistic".into(), rate.agbm, &cls));

    let tree_ls = BoostConfig::new(Algorithm::Agbm, 1.0, 50).with_gamma(0.1);
    runs.push(("tree ls".into(), train(&reg, &Loss::least_squares(), &tree_ls, None)?, &reg));
    let tree_lg = BoostConfig::new(Algorithm::Agbm, 4.0, 50).with_gamma(0.3);
    runs.push(("tree logistic".into(), train(&cls, &Loss::logistic(), &tree_lg, None)?, &cls));

    let mut checks = Vec::new();
    for (name, out, data) in &runs {
        checks.extend(invariant_checks(name, out));
        checks.push(model_consistency(name, out, data)?);
    }
    Ok(checks)
}
