use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use taskmerge_core::gbdt::best_split;
use taskmerge_core::{generate_dataset, train, Hyperparams, OracleConfig, Predictor};

fn split_search(c: &mut Criterion) {
    let values: Vec<f64> = (0..4000).map(|i| ((i * 7919) % 4001) as f64).collect();
    let residuals: Vec<f64> = values.iter().map(|v| (v / 500.0).sin()).collect();
    c.bench_function("best_split/4000", |b| {
        b.iter(|| best_split(black_box(&values), black_box(&residuals), 2))
    });
}

fn boosting(c: &mut Criterion) {
    let data = generate_dataset(40, 50, &OracleConfig::default()).unwrap();
    let mut group = c.benchmark_group("train_2000_samples");
    group.sample_size(10);
    for depth in [3usize, 11] {
        let hp = Hyperparams {
            num_trees: 50,
            max_depth: depth,
            ..Hyperparams::default()
        };
        group.bench_with_input(BenchmarkId::new("depth", depth), &hp, |b, hp| {
            b.iter(|| train(black_box(&data), hp).unwrap())
        });
    }
    group.finish();

    let model = train(&data, &Hyperparams::default()).unwrap();
    c.bench_function("predict_2000_samples", |b| {
        b.iter(|| {
            data.samples
                .iter()
                .map(|s| model.predict(black_box(&s.features)))
                .sum::<f64>()
        })
    });
}

criterion_group!(benches, split_search, boosting);
criterion_main!(benches);
