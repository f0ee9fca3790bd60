mod common;

use agboost::booster::{train, Algorithm, BoostConfig};
use agboost::dataset::{parse_libsvm, Dataset, Matrix};
use agboost::diagnostics::{detect_divergence, fit_slope, mca_estimate, reference_optimum};
use agboost::learners::{cosine_fit, TreeConfig};
use agboost::loss::Loss;
use agboost::synth;

use common::{brute_force_stump, dataset_path};

fn two_feature_problem() -> Dataset {
    let base = synth::regression(40, 2, 12).unwrap();
    // Coarsen to a grid so q = 100 covers every distinct value.
    let rows: Vec<Vec<f64>> = (0..base.n_rows())
        .map(|i| base.features().row(i).iter().map(|v| (v * 10.0).round()).collect())
        .collect();
    Dataset::new(Matrix::from_rows(&rows).unwrap(), base.labels().to_vec()).unwrap()
}

#[test]
fn mca_estimate_matches_exhaustive_stumps() {
    let data = two_feature_problem();
    let loss = Loss::least_squares();
    let eta = 0.5;
    let config = BoostConfig::new(Algorithm::Gbm, eta, 25).with_tree(TreeConfig {
        depth_limit: 1,
        ..TreeConfig::default()
    });
    let out = train(&data, &loss, &config, None).unwrap();

    // Replay with the brute-force stump as the learner.
    let x = data.features();
    let mut f = vec![0.0; data.n_rows()];
    let mut cosines = Vec::new();
    for _ in 0..25 {
        let r = loss.pseudo_residual(data.labels(), &f).unwrap();
        let s = brute_force_stump(&r, &data).unwrap();
        let p: Vec<f64> = (0..data.n_rows())
            .map(|i| if x.get(i, s.feature) <= s.threshold { s.left } else { s.right })
            .collect();
        cosines.push(cosine_fit(&r, &p));
        for (fi, pi) in f.iter_mut().zip(&p) {
            *fi += eta * pi;
        }
    }
    let brute = cosines.into_iter().fold(f64::INFINITY, f64::min);
    let est = mca_estimate(&out.trace).unwrap();
    assert!((est - brute).abs() < 1e-12, "{est} vs {brute}");
    assert!(est > 0.0 && est <= 1.0);
}

#[test]
fn oracle_trace_has_unit_mca() {
    let data = synth::regression(30, 3, 2).unwrap();
    let config = BoostConfig::new(Algorithm::Agbm, 0.5, 10)
        .with_learner(agboost::LearnerKind::Oracle);
    let out = train(&data, &Loss::least_squares(), &config, None).unwrap();
    assert!((mca_estimate(&out.trace).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn line_searched_gbm_never_flags_divergence() {
    for seed in 0..5 {
        let data = synth::classification(100, 3, seed).unwrap();
        let config = BoostConfig::new(Algorithm::Gbm, 1.0, 30).with_line_search(true);
        let out = train(&data, &Loss::logistic(), &config, None).unwrap();
        assert!(!detect_divergence(&out.trace).diverged);
    }
}

#[test]
fn vagbm_diverges_on_housing_at_unit_step() {
    let Some(path) = dataset_path("housing") else {
        panic!("bundled housing data missing");
    };
    let data = parse_libsvm(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap();
    let config = BoostConfig::new(Algorithm::Vagbm, 1.0, 100);
    let out = train(&data, &Loss::least_squares(), &config, None).unwrap();
    let d = detect_divergence(&out.trace);
    assert!(d.diverged);
    assert!(d.final_loss > 2.0 * d.min_loss || out.trace.diverged);
}

#[test]
fn reference_optimum_bounds_the_runs() {
    let data = synth::classification(80, 3, 1).unwrap();
    let loss = Loss::logistic();
    let l_star = reference_optimum(&loss, data.labels(), 20_000, 4.0, 0.2).unwrap();
    let config = BoostConfig::new(Algorithm::Agbm, 4.0, 100)
        .with_gamma(0.2)
        .with_learner(agboost::LearnerKind::Oracle);
    let out = train(&data, &loss, &config, None).unwrap();
    assert!(out.trace.train_losses().iter().all(|&l| l >= l_star));
    let slope = fit_slope(&out.trace, l_star, 10..=100).unwrap();
    assert!(slope.slope < -1.0, "{}", slope.slope);
}
