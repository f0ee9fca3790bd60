//! Post-hoc analysis of training traces.
//!
//! Loss indices follow the trace: `L(f^m)` is `trace.train_losses()[m]`, so
//! `m = 0` is the starting model.

use std::io::Write;
use std::ops::RangeInclusive;

use serde::Serialize;

use crate::booster::TrainTrace;
use crate::error::{BoostError, Result};
use crate::loss::Loss;

/// Slack for `lhs <= rhs` comparisons in bound reports.
pub const BOUND_SLACK: f64 = 1e-9;

/// Ratio of final to minimum training loss above which a run counts as
/// divergent.
pub const DIVERGENCE_RATIO: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub m: usize,
    /// `L(f^m) - L*`.
    pub lhs: f64,
    /// `|f*(X)|^2 / (2 eta gamma (m+1)^2)`.
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }

    pub fn first_violation(&self) -> Option<&BoundRow> {
        self.rows.iter().find(|r| !r.satisfied)
    }

    /// Smallest `rhs - lhs` over the report.
    pub fn min_slack(&self) -> f64 {
        self.rows.iter().map(|r| r.rhs - r.lhs).fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "m,lhs,rhs,satisfied")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.m, r.lhs, r.rhs, r.satisfied)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let violations = self.rows.iter().filter(|r| !r.satisfied).count();
        let mut s = format!(
            "bound rows: {}\nviolations: {}\nmin slack: {:.6e}\n",
            self.rows.len(),
            violations,
            self.min_slack()
        );
        if let Some(v) = self.first_violation() {
            s.push_str(&format!("first violation: m={} lhs={:.6e} rhs={:.6e}\n", v.m, v.lhs, v.rhs));
        }
        s
    }
}

/// Checks `L(f^m) - L* <= |f*(X)|^2 / (2 eta gamma (m+1)^2)` at every
/// recorded `m`, starting from `m = 0`.
pub fn agbm_bound(
    trace: &TrainTrace,
    f_star_norm_sq: f64,
    l_star: f64,
    eta: f64,
    gamma: f64,
) -> Result<BoundReport> {
    if f_star_norm_sq.is_nan() || f_star_norm_sq < 0.0 {
        return Err(BoostError::input(format!(
            "|f*|^2 must be nonnegative, got {f_star_norm_sq}"
        )));
    }
    if !(eta > 0.0 && gamma > 0.0) {
        return Err(BoostError::input("eta and gamma must be positive"));
    }
    let losses = trace.train_losses();
    if let Some((m, l)) = losses
        .iter()
        .enumerate()
        .find(|(_, &l)| l_star > l + BOUND_SLACK)
    {
        return Err(BoostError::input(format!(
            "supplied optimum {l_star} exceeds the training loss {l} at m={m}"
        )));
    }
    let rows = losses
        .iter()
        .enumerate()
        .map(|(m, &l)| {
            let lhs = l - l_star;
            let k = (m + 1) as f64;
            let rhs = f_star_norm_sq / (2.0 * eta * gamma * k * k);
            BoundRow {
                m,
                lhs,
                rhs,
                satisfied: lhs <= rhs + BOUND_SLACK,
            }
        })
        .collect();
    Ok(BoundReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (usize, usize),
}

impl SlopeReport {
    pub fn summary(&self) -> String {
        format!(
            "window: [{}, {}]\nslope: {:.6}\nintercept: {:.6}\nr^2: {:.6}\n",
            self.window.0, self.window.1, self.slope, self.intercept, self.r_squared
        )
    }
}

/// Least-squares line through `(log m, log(L(f^m) - L*))` for `m` in
/// `window`.
pub fn fit_slope(trace: &TrainTrace, l_star: f64, window: RangeInclusive<usize>) -> Result<SlopeReport> {
    let losses = trace.train_losses();
    let (lo, hi) = (*window.start(), *window.end());
    if lo == 0 || hi <= lo {
        return Err(BoostError::input(format!(
            "slope window [{lo}, {hi}] needs 1 <= start < end"
        )));
    }
    if hi >= losses.len() {
        return Err(BoostError::input(format!(
            "slope window ends at {hi} but the trace stops at m={}",
            losses.len() - 1
        )));
    }
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for (m, &loss) in losses.iter().enumerate().take(hi + 1).skip(lo) {
        let gap = loss - l_star;
        if gap.is_nan() || gap <= 0.0 {
            return Err(BoostError::input(format!(
                "suboptimality {gap} at m={m} is not positive"
            )));
        }
        xs.push((m as f64).ln());
        ys.push(gap.ln());
    }
    let (slope, intercept, r_squared) = ols(&xs, &ys);
    Ok(SlopeReport {
        slope,
        intercept,
        r_squared,
        window: (lo, hi),
    })
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r_squared)
}

/// Smallest recorded first-fit cosine, skipping iterations whose residual
/// was exactly zero.
///
/// This estimates the minimal cosine angle only over the residuals the run
/// actually visited and the greedy fits it produced, so it is neither an
/// upper nor a lower bound on the true constant.
pub fn mca_estimate(trace: &TrainTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(BoostError::input("cannot estimate from an empty trace"));
    }
    trace
        .records
        .iter()
        .filter(|r| r.residual_norm > 0.0)
        .map(|r| r.cos_r)
        .reduce(f64::min)
        .ok_or_else(|| BoostError::input("every recorded residual is zero"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergence {
    pub diverged: bool,
    /// First `m` with `L(f^m)` above twice the running minimum.
    pub first_iteration: Option<usize>,
    pub min_loss: f64,
    pub final_loss: f64,
}

pub fn detect_divergence(trace: &TrainTrace) -> Divergence {
    let losses = trace.train_losses();
    let min_loss = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let final_loss = *losses.last().expect("train_losses is never empty");
    let mut running = f64::INFINITY;
    let mut first = None;
    for (m, &l) in losses.iter().enumerate() {
        if (l.is_nan() || l > DIVERGENCE_RATIO * running) && first.is_none() {
            first = Some(m);
        }
        running = running.min(l);
    }
    let diverged = trace.diverged || final_loss.is_nan() || final_loss > DIVERGENCE_RATIO * min_loss;
    Divergence {
        diverged,
        first_iteration: if diverged { first } else { None },
        min_loss,
        final_loss,
    }
}

/// Best loss seen by exact-fit accelerated descent on the training
/// predictions, used as `L*` when no closed form is at hand.
///
/// Runs the strong-learner recursion `g = (1-theta) f + theta h`,
/// `f <- g + eta r`, `h <- h + (gamma eta / theta) r` directly on the
/// prediction vector from `f = h = 0`.
pub fn reference_optimum(loss: &Loss, labels: &[f64], iterations: usize, eta: f64, gamma: f64) -> Result<f64> {
    loss.check_labels(labels)?;
    if labels.is_empty() {
        return Err(BoostError::input("no labels"));
    }
    let n = labels.len();
    let mut f = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut best = loss.total_loss_unchecked(labels, &f);
    for m in 0..iterations {
        let th = 2.0 / (m as f64 + 2.0);
        let a = gamma * eta / th;
        let mut total = 0.0;
        for i in 0..n {
            let g = (1.0 - th) * f[i] + th * h[i];
            let r = -loss.derivative_unchecked(labels[i], g);
            f[i] = g + eta * r;
            h[i] += a * r;
            total += loss.value_unchecked(labels[i], f[i]);
        }
        best = best.min(total);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::booster::{Algorithm, IterationRecord};

    fn trace_from(initial: f64, losses: &[f64]) -> TrainTrace {
        let mut t = TrainTrace::new(Algorithm::Agbm, initial, None);
        for (i, &l) in losses.iter().enumerate() {
            t.records.push(IterationRecord {
                iteration: i,
                trees: 2 * (i + 1),
                train_loss: l,
                test_loss: None,
                residual_norm: 1.0,
                cos_r: 1.0,
                cos_c: None,
                bound_rhs: None,
                wall_time_ms: 0.0,
                step: 1.0,
                skipped: false,
                invariants: None,
            });
        }
        t
    }

    fn power_law(p: f64, m_max: usize) -> TrainTrace {
        let losses: Vec<f64> = (1..=m_max).map(|m| (m as f64).powf(-p)).collect();
        trace_from(10.0, &losses)
    }

    #[test]
    fn slope_recovers_power_laws() {
        let r = fit_slope(&power_law(2.0, 300), 0.0, 20..=200).unwrap();
        assert!((r.slope + 2.0).abs() < 1e-6, "{}", r.slope);
        assert!((r.r_squared - 1.0).abs() < 1e-9);
        let r = fit_slope(&power_law(1.0, 300), 0.0, 20..=200).unwrap();
        assert!((r.slope + 1.0).abs() < 1e-6, "{}", r.slope);
    }

    #[test]
    fn slope_rejects_nonpositive_gap() {
        let t = trace_from(1.0, &[0.5, 0.25, 0.0]);
        assert!(fit_slope(&t, 0.0, 1..=3).is_err());
        assert!(fit_slope(&t, 0.0, 1..=9).is_err());
    }

    #[test]
    fn bound_first_row_and_satisfaction() {
        let t = trace_from(2.0, &[0.4]);
        let r = agbm_bound(&t, 4.0, 0.0, 1.0, 0.5).unwrap();
        assert_eq!(r.rows[0].rhs, 4.0);
        assert_eq!(r.rows[1].rhs, 1.0);
        assert!(r.all_satisfied());

        let r = agbm_bound(&t, 1.0, 0.0, 1.0, 0.5).unwrap();
        assert!(!r.rows[0].satisfied);
        assert_eq!(r.first_violation().unwrap().m, 0);
    }

    #[test]
    fn bound_rejects_optimum_above_losses() {
        let t = trace_from(2.0, &[0.4]);
        assert!(agbm_bound(&t, 1.0, 0.5, 1.0, 0.2).is_err());
        assert!(agbm_bound(&t, 1.0, 0.4 + 1e-10, 1.0, 0.2).is_ok());
    }

    #[test]
    fn bound_shrinks_with_gamma() {
        let t = trace_from(2.0, &[1.0, 0.5, 0.25]);
        let a = agbm_bound(&t, 3.0, 0.0, 1.0, 0.2).unwrap();
        let b = agbm_bound(&t, 3.0, 0.0, 1.0, 0.3).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!(y.rhs < x.rhs);
        }
    }

    #[test]
    fn mca_examples() {
        let mut t = trace_from(1.0, &[0.9, 0.8, 0.7]);
        for r in &mut t.records {
            r.cos_r = 0.4;
        }
        assert_eq!(mca_estimate(&t).unwrap(), 0.4);
        t.records[1].cos_r = 0.1;
        t.records[1].residual_norm = 0.0;
        assert_eq!(mca_estimate(&t).unwrap(), 0.4);
        assert!(mca_estimate(&trace_from(1.0, &[])).is_err());
    }

    #[test]
    fn divergence_examples() {
        let d = detect_divergence(&trace_from(5.0, &[4.0, 3.0, 2.0, 1.0]));
        assert!(!d.diverged);
        assert_eq!(d.first_iteration, None);

        let d = detect_divergence(&trace_from(5.0, &[1.0, 3.0, 10.0]));
        assert!(d.diverged);
        assert_eq!(d.first_iteration, Some(2));
        assert_eq!(d.min_loss, 1.0);

        let mut flagged = trace_from(5.0, &[4.0]);
        flagged.diverged = true;
        assert!(detect_divergence(&flagged).diverged);
    }

    #[test]
    fn reference_optimum_least_squares_reaches_zero() {
        let y = [1.0, -2.0, 3.0];
        let l = reference_optimum(&Loss::least_squares(), &y, 200, 1.0, 0.2).unwrap();
        assert!(l < 1e-12);
    }
}
