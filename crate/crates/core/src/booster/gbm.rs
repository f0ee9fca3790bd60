use super::line_search::golden_section;
use super::{
    check_inputs, diverging, is_zero, norm, Algorithm, BoostConfig, Clock, EarlyStop, EnsembleModel,
    IterationRecord, Phase, TrainResult, TrainTrace,
};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::learners::{cosine_fit, LearnerFitter};
use crate::loss::{Loss, LossKind};

const LINE_SEARCH_TOL: f64 = 1e-6;

/// Classic gradient boosting: fit the pseudo-residual at `f^m`, then add
/// the fit with a fixed step `eta` or a line-searched coefficient.
///
/// A fit with all-zero training predictions means the residual is
/// orthogonal to the learner class; the iteration is recorded as skipped
/// with coefficient 0 and nothing is added to the model.
pub fn train_gbm(
    train: &Dataset,
    loss: &Loss,
    config: &BoostConfig,
    test: Option<&Dataset>,
) -> Result<TrainResult> {
    check_inputs(Algorithm::Gbm, train, loss, config, test)?;
    let clock = Clock::new(config.record_time);
    let fitter = LearnerFitter::new(config.learner_kind, train, config.tree, config.exec)?;
    let labels = train.labels();
    let n = train.n_rows();

    let mut f = vec![0.0; n];
    let mut test_f = test.map(|t| vec![0.0; t.n_rows()]);
    let test_loss = |tf: &Option<Vec<f64>>| {
        test.zip(tf.as_ref())
            .map(|(t, p)| loss.total_loss_unchecked(t.labels(), p))
    };

    let mut model = EnsembleModel::new(*loss);
    let mut trace = TrainTrace::new(
        Algorithm::Gbm,
        loss.total_loss_unchecked(labels, &f),
        test_loss(&test_f),
    );
    let mut early = EarlyStop::new(config.early_stop_rounds, trace.initial_test_loss);

    for m in 0..config.iterations {
        let r = loss.pseudo_residual_unchecked(labels, &f);
        let fit = fitter.fit(&r)?;
        let p = &fit.train_predictions;
        let skipped = is_zero(p);

        let step = if skipped {
            0.0
        } else if config.line_search {
            line_search(loss, labels, &f, &r, p)
        } else {
            config.eta
        };
        if !skipped {
            for (fi, pi) in f.iter_mut().zip(p) {
                *fi += step * pi;
            }
            if let (Some(t), Some(tf)) = (test, test_f.as_mut()) {
                let tp = fit.learner.predict(t.features())?;
                for (a, b) in tf.iter_mut().zip(tp) {
                    *a += step * b;
                }
            }
        }
        let train_loss = loss.total_loss_unchecked(labels, &f);
        let record = IterationRecord {
            iteration: m,
            trees: m + 1,
            train_loss,
            test_loss: test_loss(&test_f),
            residual_norm: norm(&r),
            cos_r: cosine_fit(&r, p),
            cos_c: None,
            bound_rhs: None,
            wall_time_ms: clock.elapsed_ms(),
            step,
            skipped,
            invariants: None,
        };
        if !skipped {
            model.push(step, fit.learner);
        }
        let stop = early.should_stop(record.test_loss);
        trace.records.push(record);
        if diverging(train_loss) {
            trace.diverged = true;
            break;
        }
        if stop {
            trace.early_stopped = true;
            break;
        }
    }

    trace.phases.push(Phase {
        first_iteration: 0,
        iterations: trace.records.len(),
    });
    Ok(TrainResult {
        model,
        trace,
        train_predictions: f,
    })
}

/// Exact minimizer for least squares; golden-section search on
/// `[0, 4/sigma * max(1, |r|/|b|)]` otherwise. Never returns a step that
/// increases the loss.
fn line_search(loss: &Loss, labels: &[f64], f: &[f64], r: &[f64], p: &[f64]) -> f64 {
    let pp: f64 = p.iter().map(|x| x * x).sum();
    match loss.kind() {
        LossKind::LeastSquares => {
            let rp: f64 = r.iter().zip(p).map(|(a, b)| a * b).sum();
            rp / pp
        }
        LossKind::Logistic => {
            let along = |s: f64| -> f64 {
                labels
                    .iter()
                    .zip(f.iter().zip(p))
                    .map(|(&y, (&fi, &pi))| loss.value_unchecked(y, fi + s * pi))
                    .sum()
            };
            let hi = 4.0 / loss.sigma() * (norm(r) / pp.sqrt()).max(1.0);
            let s = golden_section(along, 0.0, hi, LINE_SEARCH_TOL);
            if along(s) <= along(0.0) {
                s
            } else {
                0.0
            }
        }
    }
}
