use agboost::booster::{
    train, Algorithm, BoostConfig, EnsembleModel, Member, RestartOption, TrainResult,
};
use agboost::dataset::{Dataset, Matrix};
use agboost::diagnostics::{agbm_bound, detect_divergence, mca_estimate};
use agboost::learners::{Learner, LearnerKind, RegressionTree, TreeConfig};
use agboost::loss::Loss;
use agboost::par::Exec;
use agboost::synth;
use agboost::BoostError;

fn oracle(algorithm: Algorithm, eta: f64, iterations: usize) -> BoostConfig {
    BoostConfig::new(algorithm, eta, iterations).with_learner(LearnerKind::Oracle)
}

fn stumps(algorithm: Algorithm, eta: f64, iterations: usize) -> BoostConfig {
    BoostConfig::new(algorithm, eta, iterations).with_tree(TreeConfig {
        depth_limit: 1,
        ..TreeConfig::default()
    })
}

fn is_nonincreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn gbm_oracle_line_search_converges_in_one_step() {
    let data = synth::regression(30, 3, 1).unwrap();
    let config = oracle(Algorithm::Gbm, 1.0, 1).with_line_search(true);
    let out = train(&data, &Loss::least_squares(), &config, None).unwrap();
    assert_eq!(out.trace.final_train_loss(), 0.0);
    assert_eq!(out.trace.records[0].step, 1.0);
}

#[test]
fn gbm_exact_stump_clears_the_loss() {
    let x = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![1.0], vec![1.0]]).unwrap();
    let data = Dataset::new(x, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
    let out = train(&data, &Loss::least_squares(), &stumps(Algorithm::Gbm, 1.0, 1), None).unwrap();
    assert_eq!(out.trace.final_train_loss(), 0.0);
    assert_eq!(out.trace.records[0].trees, 1);
}

#[test]
fn gbm_line_search_is_monotone() {
    let reg = synth::regression(80, 4, 2).unwrap();
    let cls = synth::classification(120, 4, 2).unwrap();
    for (data, loss) in [(&reg, Loss::least_squares()), (&cls, Loss::logistic())] {
        let config = BoostConfig::new(Algorithm::Gbm, 1.0, 40).with_line_search(true);
        let out = train(data, &loss, &config, None).unwrap();
        assert!(is_nonincreasing(&out.trace.train_losses()));
        assert!(!detect_divergence(&out.trace).diverged);
    }
}

#[test]
fn gbm_skips_learners_with_zero_predictions() {
    // A constant feature cannot split; the root leaf predicts the mean
    // residual, which is zero here.
    let x = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
    let data = Dataset::new(x, vec![1.0, -1.0]).unwrap();
    let out = train(&data, &Loss::least_squares(), &stumps(Algorithm::Gbm, 1.0, 3), None).unwrap();
    assert_eq!(out.trace.len(), 3);
    assert!(out.trace.records.iter().all(|r| r.skipped && r.step == 0.0));
    assert!(out.model.members().is_empty());
}

#[test]
fn agbm_counts_two_trees_per_iteration() {
    let data = synth::regression(40, 3, 5).unwrap();
    let config = BoostConfig::new(Algorithm::Agbm, 0.5, 7);
    let out = train(&data, &Loss::least_squares(), &config, None).unwrap();
    let trees: Vec<usize> = out.trace.records.iter().map(|r| r.trees).collect();
    assert_eq!(trees, vec![2, 4, 6, 8, 10, 12, 14]);
}

#[test]
fn agbm_oracle_bound_holds_for_every_m() {
    let data = synth::regression(50, 5, 11).unwrap();
    let config = oracle(Algorithm::Agbm, 1.0, 100).with_gamma(0.2);
    let out = train(&data, &Loss::least_squares(), &config, None).unwrap();
    let y_sq: f64 = data.labels().iter().map(|y| y * y).sum();
    let report = agbm_bound(&out.trace, y_sq, 0.0, 1.0, 0.2).unwrap();
    assert_eq!(report.rows.len(), 101);
    assert!(report.all_satisfied(), "{}", report.summary());
}

#[test]
fn oracle_fits_collapse_to_a_single_direction() {
    let data = synth::classification(60, 3, 4).unwrap();
    let config = oracle(Algorithm::Agbm, 4.0, 30).with_gamma(0.2);
    let out = train(&data, &Loss::logistic(), &config, None).unwrap();
    for r in &out.trace.records {
        assert!((r.cos_r - 1.0).abs() < 1e-12);
        assert!((r.cos_c.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.invariants.unwrap().hhat_gap, Some(0.0));
    }
    assert!((mca_estimate(&out.trace).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn vagbm_with_oracle_matches_agbm_with_unit_gamma() {
    let data = synth::regression(25, 2, 6).unwrap();
    let loss = Loss::least_squares();
    for m in [1, 2, 5, 30] {
        let a = train(&data, &loss, &oracle(Algorithm::Agbm, 0.7, m).with_gamma(1.0), None).unwrap();
        let v = train(&data, &loss, &oracle(Algorithm::Vagbm, 0.7, m), None).unwrap();
        assert_eq!(a.train_predictions, v.train_predictions, "M={m}");
        assert_eq!(a.trace.train_losses(), v.trace.train_losses());
    }
}

#[test]
fn first_vagbm_step_is_a_gbm_step() {
    let data = synth::regression(60, 4, 3).unwrap();
    let loss = Loss::least_squares();
    let g = train(&data, &loss, &BoostConfig::new(Algorithm::Gbm, 0.3, 1), None).unwrap();
    let v = train(&data, &loss, &BoostConfig::new(Algorithm::Vagbm, 0.3, 1), None).unwrap();
    assert_eq!(g.train_predictions, v.train_predictions);
}

#[test]
fn vagbm_divergence_stops_the_run() {
    let data = synth::regression(200, 5, 1).unwrap();
    let out = train(&data, &Loss::least_squares(), &stumps(Algorithm::Vagbm, 1.0, 5000), None).unwrap();
    assert!(out.trace.diverged);
    assert!(out.trace.len() < 5000);
    assert!(detect_divergence(&out.trace).diverged);
}

#[test]
fn fixed_restarts_use_the_computed_period() {
    let data = synth::regression(50, 5, 2).unwrap();
    let config = oracle(Algorithm::Agbmr, 1.0, 18)
        .with_gamma(0.2)
        .with_restart(RestartOption::FixedPeriod, Some(1.0));
    let out = train(&data, &Loss::least_squares(), &config, None).unwrap();
    let lengths: Vec<usize> = out.trace.phases.iter().map(|p| p.iterations).collect();
    assert_eq!(lengths, vec![4, 4, 4, 4, 2]);
    let firsts: Vec<usize> = out.trace.phases.iter().map(|p| p.first_iteration).collect();
    assert_eq!(firsts, vec![0, 4, 8, 12, 16]);
}

#[test]
fn fixed_restarts_need_mu() {
    let data = synth::regression(10, 2, 2).unwrap();
    let config = oracle(Algorithm::Agbmr, 1.0, 8).with_restart(RestartOption::FixedPeriod, None);
    let e = train(&data, &Loss::least_squares(), &config, None).unwrap_err();
    assert!(matches!(e, BoostError::Config(_)));
    assert!(e.to_string().contains("mu"));
}

#[test]
fn adaptive_restart_on_a_monotone_run_is_plain_agbm() {
    let data = synth::regression(80, 4, 7).unwrap();
    let loss = Loss::least_squares();
    let base = BoostConfig::new(Algorithm::Agbm, 0.1, 20).with_gamma(0.1);
    let agbm = train(&data, &loss, &base, None).unwrap();
    assert!(is_nonincreasing(&agbm.trace.train_losses()), "reference run must be monotone");

    let mut config = base.clone();
    config.algorithm = Algorithm::Agbmr;
    config.restart_option = RestartOption::Adaptive;
    let r = train(&data, &loss, &config, None).unwrap();
    assert_eq!(r.trace.phases.len(), 1);
    assert_eq!(r.trace.discarded_iterations, 0);
    assert_eq!(r.train_predictions, agbm.train_predictions);
    assert_eq!(r.trace.train_losses(), agbm.trace.train_losses());
}

#[test]
fn adaptive_restart_discards_increasing_iterates() {
    let data = synth::regression(200, 5, 1).unwrap();
    let config = BoostConfig::new(Algorithm::Agbmr, 1.0, 200)
        .with_gamma(0.5)
        .with_tree(TreeConfig {
            depth_limit: 1,
            ..TreeConfig::default()
        });
    let out = train(&data, &Loss::least_squares(), &config, None).unwrap();
    assert!(out.trace.discarded_iterations > 0);
    assert!(out.trace.phases.len() > 1);
    // Within a phase the loss never rises.
    let losses = out.trace.train_losses();
    for p in &out.trace.phases {
        let seg = &losses[p.first_iteration..=p.first_iteration + p.iterations];
        assert!(is_nonincreasing(seg));
    }
    assert!(is_nonincreasing(&out.trace.phase_boundary_losses()));
}

fn expanded_error(out: &TrainResult, data: &Dataset) -> f64 {
    let pred = out.model.predict(data.features()).unwrap();
    let scale = out.train_predictions.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    pred.iter()
        .zip(&out.train_predictions)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

#[test]
fn expanded_models_reproduce_tracked_predictions() {
    let reg = synth::regression(100, 4, 3).unwrap();
    let cls = synth::classification(100, 4, 3).unwrap();
    let restart = BoostConfig::new(Algorithm::Agbmr, 0.5, 40)
        .with_gamma(0.2)
        .with_restart(RestartOption::FixedPeriod, Some(1.0));
    let cases = [
        (&reg, Loss::least_squares(), BoostConfig::new(Algorithm::Agbm, 1.0, 60).with_gamma(0.1)),
        (&reg, Loss::least_squares(), restart),
        (&reg, Loss::least_squares(), BoostConfig::new(Algorithm::Vagbm, 0.1, 40)),
        (&cls, Loss::logistic(), BoostConfig::new(Algorithm::Agbm, 4.0, 60).with_gamma(0.3)),
        (&cls, Loss::logistic(), BoostConfig::new(Algorithm::Gbm, 1.0, 30).with_line_search(true)),
    ];
    for (data, loss, config) in cases {
        let out = train(data, &loss, &config, None).unwrap();
        assert!(expanded_error(&out, data) <= 1e-8, "{:?}", config.algorithm);
    }
}

#[test]
fn test_losses_follow_the_model() {
    let data = synth::regression(150, 4, 8).unwrap();
    let test = synth::regression(50, 4, 9).unwrap();
    let loss = Loss::least_squares();
    for alg in [Algorithm::Gbm, Algorithm::Agbm, Algorithm::Vagbm] {
        let config = BoostConfig::new(alg, 0.3, 15).with_gamma(0.2);
        let out = train(&data, &loss, &config, Some(&test)).unwrap();
        let pred = out.model.predict(test.features()).unwrap();
        let direct = loss.total_loss(test.labels(), &pred).unwrap();
        let traced = out.trace.records.last().unwrap().test_loss.unwrap();
        assert!((direct - traced).abs() <= 1e-9 * direct.max(1.0), "{alg:?}");
    }
}

#[test]
fn early_stopping_watches_the_test_loss() {
    let data = synth::regression(60, 4, 1).unwrap();
    let test = synth::regression(60, 4, 2).unwrap();
    let mut config = BoostConfig::new(Algorithm::Gbm, 1.0, 500).with_tree(TreeConfig {
        depth_limit: 6,
        ..TreeConfig::default()
    });
    config.early_stop_rounds = Some(5);
    let out = train(&data, &Loss::least_squares(), &config, Some(&test)).unwrap();
    assert!(out.trace.early_stopped);
    assert!(out.trace.len() < 500);
}

#[test]
fn sequential_execution_gives_identical_traces() {
    let data = synth::classification(150, 6, 5).unwrap();
    let mut config = BoostConfig::new(Algorithm::Agbm, 1.0, 20).with_gamma(0.2);
    config.exec = Exec::Sequential;
    let a = train(&data, &Loss::logistic(), &config, None).unwrap();
    config.exec = Exec::Parallel;
    let b = train(&data, &Loss::logistic(), &config, None).unwrap();
    assert_eq!(a.trace.to_csv_string(), b.trace.to_csv_string());
    assert_eq!(a.model, b.model);
}

#[test]
fn saved_models_predict_identically() {
    let data = synth::regression(80, 3, 4).unwrap();
    let out = train(
        &data,
        &Loss::least_squares(),
        &BoostConfig::new(Algorithm::Agbm, 0.5, 10),
        None,
    )
    .unwrap();
    let back = EnsembleModel::from_json(&out.model.to_json().unwrap()).unwrap();
    assert_eq!(
        back.predict(data.features()).unwrap(),
        out.model.predict(data.features()).unwrap()
    );
}

#[test]
fn single_member_prediction() {
    let model = EnsembleModel::from_members(
        Loss::least_squares(),
        0.0,
        vec![Member {
            coefficient: 0.1,
            learner: Learner::Tree(RegressionTree::leaf(1.0, 2)),
        }],
    );
    let rows = Matrix::from_rows(&[vec![3.0, 4.0], vec![-1.0, 0.0]]).unwrap();
    assert_eq!(model.predict(&rows).unwrap(), vec![0.1, 0.1]);
    let wide = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
    assert!(model.predict(&wide).is_err());
}
