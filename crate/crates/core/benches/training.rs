use std::hint::black_box;

use agboost::booster::{train, Algorithm, BoostConfig};
use agboost::loss::Loss;
use agboost::par::Exec;
use agboost::synth;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn training(c: &mut Criterion) {
    let data = synth::classification(5_000, 20, 2).unwrap();
    let loss = Loss::logistic();
    let mut group = c.benchmark_group("train_50_trees");
    group.sample_size(10);
    for alg in [Algorithm::Gbm, Algorithm::Agbm] {
        let iterations = 50 / alg.trees_per_iteration();
        for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            let mut config = BoostConfig::new(alg, 0.5, iterations).with_gamma(0.3);
            config.exec = exec;
            group.bench_with_input(BenchmarkId::new(name, alg.name()), &config, |b, config| {
                b.iter(|| train(black_box(&data), &loss, config, None).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, training);
criterion_main!(benches);
