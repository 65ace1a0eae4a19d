use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use metarec::pool::{compute_similarity, estimate_baselines, fit_predictor, SimilarityMeasure};
use metarec::rng;
use metarec::{AlgorithmId, PoolConfig, RatingMatrix};

fn synthetic(users: u32, items: u32, density: u64, seed: u64) -> Arc<RatingMatrix> {
    let mut g = rng::stream(seed, 0);
    let mut triples = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if rng::below(&mut g, 100) < density {
                triples.push((u, i, 1.0 + rng::below(&mut g, 5) as f64));
            }
        }
    }
    Arc::new(RatingMatrix::from_triples(triples).unwrap())
}

fn bench_fit(c: &mut Criterion) {
    let m = synthetic(300, 400, 6, 1);
    let cfg = PoolConfig::with_seed(1);
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for id in AlgorithmId::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(id.as_str()), &id, |b, &id| {
            b.iter(|| fit_predictor(id, &m, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_similarity(c: &mut Criterion) {
    let m = synthetic(300, 400, 6, 2);
    let baselines = estimate_baselines(&m, 15.0, 10.0, 10).unwrap();
    c.bench_function("similarity_msd", |b| {
        b.iter(|| compute_similarity(&m, SimilarityMeasure::Msd, 1, 100.0, None).unwrap())
    });
    c.bench_function("similarity_pearson_baseline", |b| {
        b.iter(|| compute_similarity(&m, SimilarityMeasure::PearsonBaseline, 1, 100.0, Some(&baselines)).unwrap())
    });
}

fn bench_predict(c: &mut Criterion) {
    let m = synthetic(300, 400, 6, 3);
    let cfg = PoolConfig::with_seed(3);
    let knn = fit_predictor(AlgorithmId::KnnBaseline, &m, &cfg).unwrap();
    c.bench_function("predict_knn_baseline_1k", |b| {
        b.iter(|| (0..1000u32).map(|k| knn.predict(k % 300, (k * 7) % 400).value).sum::<f64>())
    });
}

criterion_group!(benches, bench_fit, bench_similarity, bench_predict);
criterion_main!(benches);
