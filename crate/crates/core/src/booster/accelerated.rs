//! Accelerated drivers built on three prediction sequences: the primary
//! ensemble `f`, the momentum ensemble `h`, and their mixture
//! `g = (1 - theta) f + theta h` with `theta_m = 2/(m+2)`.
//!
//! Per iteration `m` (corrected variant):
//!
//! ```text
//! r   = -dL/dg at g^m
//! f'  = g + eta * b1(X)                  b1 fits r
//! c   = r                                m = 0
//! c   = r + (m+1)/(m+2) (c_prev - b2_prev(X))
//! h'  = h + (gamma eta / theta) * b2(X)  b2 fits c
//! ```
//!
//! The vanilla variant adds one learner per iteration and moves `h` by
//! `(eta / theta) * b1(X)` instead.
//!
//! The model is kept as one learner list with two coefficient arrays, one
//! per ensemble: each iteration mixes `coef_f <- (1 - theta) coef_f +
//! theta coef_h`, then appends `b1` to `f` and `b2` to `h`.

use super::{
    check_inputs, diverging, is_zero, restart_period, Algorithm, BoostConfig, Clock, EarlyStop,
    EnsembleModel, InvariantCheck, IterationRecord, Member, Phase, RestartOption, TrainResult,
    TrainTrace,
};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::learners::{cosine_fit, Learner, LearnerFitter};
use crate::loss::Loss;

/// Training-row state of the accelerated sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    /// `f^m(X)`.
    pub f_pred: Vec<f64>,
    /// `h^m(X)`.
    pub h_pred: Vec<f64>,
    /// `hhat^m(X) = hhat^0 + sum_j alpha_j r^j`, tracked to check the
    /// relation `hhat = h + alpha (c - b2(X))`.
    pub hhat_pred: Vec<f64>,
    /// `c^{m-1}`.
    pub c_prev: Vec<f64>,
    /// `b2^{m-1}(X)`.
    pub b2_prev_pred: Vec<f64>,
    /// Iteration counter within the current phase.
    pub m: usize,
}

impl MomentumState {
    /// Phase start: `h = hhat = f`, no carried residual error.
    pub fn start(f_pred: Vec<f64>) -> Self {
        let n = f_pred.len();
        MomentumState {
            h_pred: f_pred.clone(),
            hhat_pred: f_pred.clone(),
            f_pred,
            c_prev: vec![0.0; n],
            b2_prev_pred: vec![0.0; n],
            m: 0,
        }
    }

    /// `theta_m = 2 / (m + 2)`.
    pub fn theta(&self) -> f64 {
        theta(self.m)
    }
}

pub(crate) fn theta(m: usize) -> f64 {
    2.0 / (m as f64 + 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Variant {
    Corrected { gamma: f64 },
    Vanilla,
}

#[derive(Debug, Clone)]
struct Coefficients {
    learners: Vec<Learner>,
    f: Vec<f64>,
    h: Vec<f64>,
}

impl Coefficients {
    fn mix(&mut self, theta: f64) {
        for (cf, ch) in self.f.iter_mut().zip(&self.h) {
            *cf = (1.0 - theta) * *cf + theta * ch;
        }
    }

    fn push(&mut self, learner: Learner, coef_f: f64, coef_h: f64) {
        self.learners.push(learner);
        self.f.push(coef_f);
        self.h.push(coef_h);
    }

    fn restart(&mut self) {
        self.h.clone_from(&self.f);
    }

    fn snapshot(&self) -> (usize, Vec<f64>, Vec<f64>) {
        (self.learners.len(), self.f.clone(), self.h.clone())
    }

    fn rollback(&mut self, snap: (usize, Vec<f64>, Vec<f64>)) {
        self.learners.truncate(snap.0);
        self.f = snap.1;
        self.h = snap.2;
    }

    fn into_model(self, loss: &Loss) -> EnsembleModel {
        let members = self
            .learners
            .into_iter()
            .zip(self.f)
            .filter(|(_, c)| *c != 0.0)
            .map(|(learner, coefficient)| Member {
                coefficient,
                learner,
            })
            .collect();
        EnsembleModel::from_members(*loss, 0.0, members)
    }
}

#[derive(Debug, Clone)]
struct TestState {
    f: Vec<f64>,
    h: Vec<f64>,
}

struct Step {
    train_loss: f64,
    test_loss: Option<f64>,
    residual_norm: f64,
    cos_r: f64,
    cos_c: Option<f64>,
    skipped: bool,
    invariants: InvariantCheck,
}

struct Engine<'a> {
    train: &'a Dataset,
    test: Option<&'a Dataset>,
    loss: &'a Loss,
    eta: f64,
    variant: Variant,
    fitter: LearnerFitter,
    state: MomentumState,
    coeffs: Coefficients,
    test_state: Option<TestState>,
}

impl<'a> Engine<'a> {
    fn new(
        train: &'a Dataset,
        test: Option<&'a Dataset>,
        loss: &'a Loss,
        config: &BoostConfig,
        variant: Variant,
    ) -> Result<Self> {
        Ok(Engine {
            train,
            test,
            loss,
            eta: config.eta,
            variant,
            fitter: LearnerFitter::new(config.learner_kind, train, config.tree, config.exec)?,
            state: MomentumState::start(vec![0.0; train.n_rows()]),
            coeffs: Coefficients {
                learners: Vec::new(),
                f: Vec::new(),
                h: Vec::new(),
            },
            test_state: test.map(|t| TestState {
                f: vec![0.0; t.n_rows()],
                h: vec![0.0; t.n_rows()],
            }),
        })
    }

    fn train_loss(&self) -> f64 {
        self.loss.total_loss_unchecked(self.train.labels(), &self.state.f_pred)
    }

    fn test_loss(&self) -> Option<f64> {
        self.test
            .zip(self.test_state.as_ref())
            .map(|(t, s)| self.loss.total_loss_unchecked(t.labels(), &s.f))
    }

    fn restart(&mut self) {
        self.state = MomentumState::start(std::mem::take(&mut self.state.f_pred));
        self.coeffs.restart();
        if let Some(ts) = self.test_state.as_mut() {
            ts.h.clone_from(&ts.f);
        }
    }

    fn step(&mut self) -> Result<Step> {
        let labels = self.train.labels();
        let eta = self.eta;
        let m = self.state.m;
        let th = theta(m);

        let g: Vec<f64> = self
            .state
            .f_pred
            .iter()
            .zip(&self.state.h_pred)
            .map(|(f, h)| (1.0 - th) * f + th * h)
            .collect();
        let loss_at_g = self.loss.total_loss_unchecked(labels, &g);
        let r = self.loss.pseudo_residual_unchecked(labels, &g);

        let fit1 = self.fitter.fit(&r)?;
        let p1 = fit1.train_predictions;
        let skipped1 = is_zero(&p1);
        let f_next: Vec<f64> = g.iter().zip(&p1).map(|(gi, pi)| gi + eta * pi).collect();
        let train_loss = self.loss.total_loss_unchecked(labels, &f_next);

        let r_norm_sq: f64 = r.iter().map(|x| x * x).sum();
        let miss_sq: f64 = p1.iter().zip(&r).map(|(p, ri)| (p - ri) * (p - ri)).sum();
        let decrease_margin = loss_at_g - 0.5 * eta * r_norm_sq + 0.5 * eta * miss_sq - train_loss;

        let test_p1 = match self.test {
            Some(t) if !skipped1 => Some(fit1.learner.predict(t.features())?),
            _ => None,
        };
        if let Some(ts) = self.test_state.as_mut() {
            for (f, h) in ts.f.iter_mut().zip(&ts.h) {
                *f = (1.0 - th) * *f + th * h;
            }
            if let Some(tp) = &test_p1 {
                for (f, p) in ts.f.iter_mut().zip(tp) {
                    *f += eta * p;
                }
            }
        }
        self.coeffs.mix(th);

        let mut cos_c = None;
        let mut hhat_gap = None;
        let mut hhat_scale = None;
        let mut skipped = skipped1;
        match self.variant {
            Variant::Corrected { gamma } => {
                if !skipped1 {
                    self.coeffs.push(fit1.learner, eta, 0.0);
                }
                let decay = (m as f64 + 1.0) / (m as f64 + 2.0);
                let c: Vec<f64> = if m == 0 {
                    r.clone()
                } else {
                    r.iter()
                        .zip(self.state.c_prev.iter().zip(&self.state.b2_prev_pred))
                        .map(|(ri, (cp, bp))| ri + decay * (cp - bp))
                        .collect()
                };
                let fit2 = self.fitter.fit(&c)?;
                let p2 = fit2.train_predictions;
                let skipped2 = is_zero(&p2);
                skipped |= skipped2;
                let alpha = gamma * eta / th;

                for ((h, hhat), (p, ri)) in self
                    .state
                    .h_pred
                    .iter_mut()
                    .zip(self.state.hhat_pred.iter_mut())
                    .zip(p2.iter().zip(&r))
                {
                    *h += alpha * p;
                    *hhat += alpha * ri;
                }
                let gap = self
                    .state
                    .hhat_pred
                    .iter()
                    .zip(&self.state.h_pred)
                    .zip(c.iter().zip(&p2))
                    .map(|((hh, h), (ci, pi))| (hh - h - alpha * (ci - pi)).abs())
                    .fold(0.0, f64::max);
                hhat_gap = Some(gap);
                hhat_scale = Some(self.state.hhat_pred.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
                cos_c = Some(cosine_fit(&c, &p2));

                if !skipped2 {
                    if let (Some(t), Some(ts)) = (self.test, self.test_state.as_mut()) {
                        let tp = fit2.learner.predict(t.features())?;
                        for (h, p) in ts.h.iter_mut().zip(tp) {
                            *h += alpha * p;
                        }
                    }
                    self.coeffs.push(fit2.learner, 0.0, alpha);
                }
                self.state.c_prev = c;
                self.state.b2_prev_pred = p2;
            }
            Variant::Vanilla => {
                let alpha = eta / th;
                for (h, p) in self.state.h_pred.iter_mut().zip(&p1) {
                    *h += alpha * p;
                }
                if let (Some(ts), Some(tp)) = (self.test_state.as_mut(), &test_p1) {
                    for (h, p) in ts.h.iter_mut().zip(tp) {
                        *h += alpha * p;
                    }
                }
                if !skipped1 {
                    self.coeffs.push(fit1.learner, eta, alpha);
                }
            }
        }

        self.state.f_pred = f_next;
        self.state.m += 1;

        Ok(Step {
            train_loss,
            test_loss: self.test_loss(),
            residual_norm: r_norm_sq.sqrt(),
            cos_r: cosine_fit(&r, &p1),
            cos_c,
            skipped,
            invariants: InvariantCheck {
                loss_at_g,
                decrease_margin,
                hhat_gap,
                hhat_scale,
            },
        })
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            state: self.state.clone(),
            coeffs: self.coeffs.snapshot(),
            test_state: self.test_state.clone(),
        }
    }

    fn rollback(&mut self, snap: Snapshot) {
        self.state = snap.state;
        self.coeffs.rollback(snap.coeffs);
        self.test_state = snap.test_state;
    }

    fn finish(self, trace: TrainTrace) -> TrainResult {
        TrainResult {
            model: self.coeffs.into_model(self.loss),
            trace,
            train_predictions: self.state.f_pred,
        }
    }
}

struct Snapshot {
    state: MomentumState,
    coeffs: (usize, Vec<f64>, Vec<f64>),
    test_state: Option<TestState>,
}

fn record(
    step: Step,
    iteration: usize,
    algorithm: Algorithm,
    eta: f64,
    clock: &Clock,
) -> IterationRecord {
    IterationRecord {
        iteration,
        trees: algorithm.trees_per_iteration() * (iteration + 1),
        train_loss: step.train_loss,
        test_loss: step.test_loss,
        residual_norm: step.residual_norm,
        cos_r: step.cos_r,
        cos_c: step.cos_c,
        bound_rhs: None,
        wall_time_ms: clock.elapsed_ms(),
        step: eta,
        skipped: step.skipped,
        invariants: Some(step.invariants),
    }
}

fn run_unrestarted(
    algorithm: Algorithm,
    variant: Variant,
    train: &Dataset,
    loss: &Loss,
    config: &BoostConfig,
    test: Option<&Dataset>,
) -> Result<TrainResult> {
    check_inputs(algorithm, train, loss, config, test)?;
    let clock = Clock::new(config.record_time);
    let mut engine = Engine::new(train, test, loss, config, variant)?;
    let mut trace = TrainTrace::new(algorithm, engine.train_loss(), engine.test_loss());
    let mut early = EarlyStop::new(config.early_stop_rounds, trace.initial_test_loss);

    for it in 0..config.iterations {
        let step = engine.step()?;
        let rec = record(step, it, algorithm, config.eta, &clock);
        let diverged = diverging(rec.train_loss);
        let stop = early.should_stop(rec.test_loss);
        trace.records.push(rec);
        if diverged {
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
    Ok(engine.finish(trace))
}

/// Accelerated boosting with error-corrected residuals; two learners per
/// iteration.
pub fn train_agbm(
    train: &Dataset,
    loss: &Loss,
    config: &BoostConfig,
    test: Option<&Dataset>,
) -> Result<TrainResult> {
    let variant = Variant::Corrected {
        gamma: config.gamma,
    };
    run_unrestarted(Algorithm::Agbm, variant, train, loss, config, test)
}

/// Direct momentum boosting with one learner per iteration. Not guaranteed
/// to converge; runs whose training loss exceeds
/// [`DIVERGENCE_CAP`](super::DIVERGENCE_CAP) stop early with
/// `trace.diverged` set.
pub fn train_vagbm(
    train: &Dataset,
    loss: &Loss,
    config: &BoostConfig,
    test: Option<&Dataset>,
) -> Result<TrainResult> {
    run_unrestarted(Algorithm::Vagbm, Variant::Vanilla, train, loss, config, test)
}

/// AGBM in restarted phases. Each phase starts from the previous phase's
/// `f` with `h = f` and the iteration counter reset.
///
/// * Fixed period: phases of `ceil(sqrt(2 / (eta gamma mu)))` iterations.
/// * Adaptive: a phase ends at the first iteration whose training loss
///   rises; that iterate is discarded and the next phase starts from the
///   previous one.
///
/// `config.iterations` caps all executed iterations, discarded ones
/// included.
pub fn train_agbmr(
    train: &Dataset,
    loss: &Loss,
    config: &BoostConfig,
    test: Option<&Dataset>,
) -> Result<TrainResult> {
    check_inputs(Algorithm::Agbmr, train, loss, config, test)?;
    let clock = Clock::new(config.record_time);
    let variant = Variant::Corrected {
        gamma: config.gamma,
    };
    let mut engine = Engine::new(train, test, loss, config, variant)?;
    let mut trace = TrainTrace::new(Algorithm::Agbmr, engine.train_loss(), engine.test_loss());
    let mut early = EarlyStop::new(config.early_stop_rounds, trace.initial_test_loss);
    let period = match config.restart_option {
        RestartOption::FixedPeriod => Some(restart_period(
            config.eta,
            config.gamma,
            config.mu.expect("validated"),
        )),
        RestartOption::Adaptive => None,
    };

    let mut phase = Phase {
        first_iteration: 0,
        iterations: 0,
    };
    let mut executed = 0;
    while executed < config.iterations {
        if period == Some(phase.iterations) {
            engine.restart();
            let next = trace.records.len();
            trace.phases.push(std::mem::replace(
                &mut phase,
                Phase {
                    first_iteration: next,
                    iterations: 0,
                },
            ));
        }

        let before = (period.is_none()).then(|| (engine.snapshot(), engine.train_loss()));
        let step = engine.step()?;
        executed += 1;

        if let Some((snap, prev_loss)) = before {
            if step.train_loss > prev_loss {
                engine.rollback(snap);
                trace.discarded_iterations += 1;
                if phase.iterations == 0 {
                    // A fresh phase cannot make progress from here.
                    break;
                }
                engine.restart();
                let next = trace.records.len();
                trace.phases.push(std::mem::replace(
                    &mut phase,
                    Phase {
                        first_iteration: next,
                        iterations: 0,
                    },
                ));
                continue;
            }
        }

        let it = trace.records.len();
        let rec = record(step, it, Algorithm::Agbmr, config.eta, &clock);
        let diverged = diverging(rec.train_loss);
        let stop = early.should_stop(rec.test_loss);
        trace.records.push(rec);
        phase.iterations += 1;
        if diverged {
            trace.diverged = true;
            break;
        }
        if stop {
            trace.early_stopped = true;
            break;
        }
    }
    if phase.iterations > 0 || trace.phases.is_empty() {
        trace.phases.push(phase);
    }
    Ok(engine.finish(trace))
}
