//! Sequential (one-thread pool) against parallel throughput of the hot loops.
//! Build with `--no-default-features` to measure the fully sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use modex::cartpole::{evaluate_policy, expert, CartPoleConfig};
use modex::extraction::{best_split, SplitRules};
use modex::{
    extract_tree, fit_forest, BoxConstraint, DiagonalGmm, ExtractionConfig, FeatureKind, FeatureSpace, FnOracle,
    ForestConfig, Interval, Label, Labels, Stream, Task,
};
use std::hint::black_box;

fn mixture() -> DiagonalGmm {
    let d = 8;
    let means = (0..4).map(|j| (0..d).map(|i| ((i + j) % 3) as f64 - 1.0).collect()).collect();
    let stds = (0..4).map(|j| vec![0.5 + 0.2 * j as f64; d]).collect();
    DiagonalGmm::new(vec![0.25; 4], means, stds).unwrap()
}

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let all = rayon::current_num_threads().max(2);
    vec![
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap()),
    ]
}

fn throughput(c: &mut Criterion) {
    let g = mixture();
    let d = g.dim();
    let bbox = BoxConstraint::from_intervals((0..d).map(|i| if i < 3 { Interval::above(-0.5) } else { Interval::FULL }).collect()).unwrap();
    let oracle = FnOracle::new(d, Task::Classification, |x: &[f64]| Label::Class(usize::from(x[0] * x[1] + x[2] > 0.0)));
    let space = FeatureSpace::anonymous(d).unwrap();
    let x = g.sample_conditional(&BoxConstraint::full(d), 10_000, Stream::new(1)).unwrap();
    let y = Labels::Classes(x.rows().into_iter().map(|r| usize::from(r[0] * r[1] + r[2] > 0.0)).collect());
    let kinds = vec![FeatureKind::Numeric; d];
    let rules = SplitRules { kinds: &kinds, features: None, min_gain: 1e-7 };
    let small = x.slice(ndarray::s![..2000, ..]).to_owned();
    let small_y = y.select(&(0..2000).collect::<Vec<_>>());

    for (name, pool) in pools() {
        let mut group = c.benchmark_group(name);
        group.sample_size(10);
        group.bench_function(BenchmarkId::new("sample_conditional", 100_000), |b| {
            b.iter(|| pool.install(|| g.sample_conditional(&bbox, 100_000, Stream::new(2)).unwrap()))
        });
        group.bench_function(BenchmarkId::new("best_split", 10_000), |b| {
            b.iter(|| pool.install(|| best_split(x.view(), &y, &rules)))
        });
        group.bench_function(BenchmarkId::new("extract_tree", 31), |b| {
            let cfg = ExtractionConfig { k: 31, n: 5000, ..Default::default() };
            b.iter(|| pool.install(|| extract_tree(&oracle, &g, &space, &cfg).unwrap()))
        });
        group.bench_function(BenchmarkId::new("fit_forest", 20), |b| {
            let cfg = ForestConfig { trees: 20, ..Default::default() };
            b.iter(|| pool.install(|| fit_forest(small.view(), &small_y, &space, &cfg).unwrap()))
        });
        group.bench_function(BenchmarkId::new("policy_eval", 100), |b| {
            let policy = |s: &[f64; 4]| expert(s);
            b.iter(|| pool.install(|| black_box(evaluate_policy(&policy, 100, 0, &CartPoleConfig::default()).unwrap())))
        });
        group.finish();
    }
}

criterion_group!(benches, throughput);
criterion_main!(benches);
